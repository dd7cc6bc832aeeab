#include "qmdp/experiment.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "qmdp/bounds.hpp"
#include "qmdp/error.hpp"

namespace qmdp {

namespace {

constexpr const char* kFig1 = R"(# Additive-noise system x' = x + a + v, v ~ N(0, 0.1^2), cost (x - a)^2.
# Truncations K_n = [-l_n, l_n] with l_n = 0.5 + 0.25 n and a pseudo-state
# for the complement; grids refine with k_m = 5 m, m = ceil(n / 3).
[model]
name = additive_noise
F = x+a
beta = 0.3
noise = gaussian
sigma = 0.1
action_halfwidth = 0.5
weight_k = 1

[truncation]
schedule = affine
l0 = 0.5
slope = 0.25

[weighting]
kind = mixture
mixture_weight = 0.5

[integration]
method = analytic-cdf
nodes = 8

[sweep]
steps = 1:15
grid_rule = refined-truncation
action_rule = refined-truncation
k_slope = 5
k_divisor = 3

[solver]
criterion = discounted
tol = 1e-10

[eval]
x0 = 0.7
rollout = false
episodes = 2000
seed = 1
tail_tol = 1e-4

[output]
precision = 17
)";

constexpr const char* kFig2 = R"(# Ricker fisheries model, long-run average reward, escapement control.
[model]
name = ricker
theta1 = 1.1
theta2 = 0.1
kappa_min = 0.005
kappa_max = 7
lambda = 0.5

[weighting]
kind = uniform-on-cell

[integration]
method = analytic-cdf
nodes = 8

[sweep]
steps = 10:250:10
grid_rule = identity
action_rule = multiple
action_multiplier = 5

[solver]
criterion = average
tol = 1e-8
damping = 0.5
ref_state = 0

[eval]
x0 = 2
rollout = false
episodes = 200
seed = 1
horizon = 2000

[output]
precision = 17
)";

constexpr const char* kSlb = R"(# Contractive additive system for the per-stage distortion floor:
# x' = 0.25 x + 0.25 a + v, v ~ U(0, 1), cost |x - a| on [0, 2] x [0, 2].
[model]
name = additive_noise
F = 0.25*x+0.25*a
beta = 0.5
noise = uniform
lambda = 1
cost = abs
bounded = true
state_lo = 0
state_hi = 2
action_lo = 0
action_hi = 2

[weighting]
kind = uniform-on-cell

[integration]
method = analytic-cdf
nodes = 8

[sweep]
steps = 4,8,16,32
grid_rule = identity
action_rule = multiple
action_multiplier = 1

[solver]
criterion = discounted
tol = 1e-10

[eval]
x0 = noise
episodes = 10000
seed = 7
horizon = 20

[output]
precision = 17
)";

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

// Typed lookups over the flat entry map; every failure names the key.
class Entries {
 public:
  explicit Entries(const std::map<std::string, std::string>& e) : e_(e) {}

  bool has(const std::string& k) const { return e_.count(k) > 0; }
  std::string str(const std::string& k, const std::string& fallback) const {
    const auto it = e_.find(k);
    return it == e_.end() ? fallback : it->second;
  }
  double real(const std::string& k, double fallback) const {
    const auto it = e_.find(k);
    return it == e_.end() ? fallback : parse_real(k, it->second);
  }
  std::optional<double> opt_real(const std::string& k) const {
    const auto it = e_.find(k);
    if (it == e_.end()) return std::nullopt;
    return parse_real(k, it->second);
  }
  std::uint64_t count(const std::string& k, std::uint64_t fallback) const {
    const auto it = e_.find(k);
    if (it == e_.end()) return fallback;
    const double v = parse_real(k, it->second);
    if (!(v >= 0.0 && v == std::floor(v) && v < 1.8e19))
      fail(ErrorKind::Input, "config key '" + k + "' must be a non-negative integer, got '" + it->second + "'");
    return static_cast<std::uint64_t>(v);
  }
  bool flag(const std::string& k, bool fallback) const {
    const auto it = e_.find(k);
    if (it == e_.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    fail(ErrorKind::Input, "config key '" + k + "' must be a boolean, got '" + it->second + "'");
  }

  static double parse_real(const std::string& k, const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v))
      fail(ErrorKind::Input, "config key '" + k + "' must be a finite number, got '" + text + "'");
    return v;
  }

 private:
  const std::map<std::string, std::string>& e_;
};

std::vector<int> parse_steps(const std::string& text) {
  std::vector<int> steps;
  auto to_int = [&](const std::string& s) {
    const double v = Entries::parse_real("sweep.steps", s);
    if (v != std::floor(v) || v < 1 || v > 1e7) fail(ErrorKind::Input, "sweep.steps entries must be integers >= 1");
    return static_cast<int>(v);
  };
  for (const std::string& part : split(text, ',')) {
    if (part.empty()) continue;
    if (part.find(':') != std::string::npos) {
      const auto r = split(part, ':');
      require(r.size() == 2 || r.size() == 3, "sweep.steps range must be first:last or first:last:stride");
      const int first = to_int(r[0]);
      const int last = to_int(r[1]);
      const int stride = r.size() == 3 ? to_int(r[2]) : 1;
      require(first <= last, "sweep.steps range must be increasing");
      for (int s = first; s <= last; s += stride) steps.push_back(s);
    } else {
      steps.push_back(to_int(part));
    }
  }
  return steps;
}

InitialState parse_x0(const std::string& text) {
  if (text == "noise") return std::nullopt;
  State x;
  for (const std::string& part : split(text, ',')) x.push_back(Entries::parse_real("eval.x0", part));
  require(!x.empty(), "eval.x0 must be a number list or 'noise'");
  return x;
}

double ceil_guarded(double v) { return std::ceil(v - 1e-9); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// --- config -----------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_entries(std::map<std::string, std::string> entries) {
  ExperimentConfig cfg;
  cfg.entries = std::move(entries);
  const Entries e(cfg.entries);

  cfg.model_name = e.str("model.name", "");
  require(!cfg.model_name.empty(), "config needs model.name");
  require(e.str("grid.placement", "cell-center") == "cell-center", "grid.placement only supports 'cell-center'");
  cfg.grid_n = e.count("grid.n_per_dim", 10);
  cfg.action_k = e.count("action_grid.k_per_dim", 10);
  require(cfg.grid_n >= 1 && cfg.action_k >= 1, "grid sizes must be at least 1");

  const std::string sched = e.str("truncation.schedule", "none");
  if (sched == "affine") {
    TruncationSchedule t;
    t.l0 = e.real("truncation.l0", t.l0);
    t.slope = e.real("truncation.slope", t.slope);
    t.validate();
    cfg.truncation = t;
  } else {
    require(sched == "none", "truncation.schedule must be 'affine' or 'none'");
  }

  cfg.weighting.kind = parse_weighting_kind(e.str("weighting.kind", "point-mass"));
  if (cfg.weighting.kind == WeightingSpec::Kind::UniformOnCell) cfg.weighting.mixture_weight = 1.0;
  if (cfg.weighting.kind == WeightingSpec::Kind::PointMass) cfg.weighting.mixture_weight = 0.0;
  cfg.weighting.mixture_weight = e.real("weighting.mixture_weight", cfg.weighting.mixture_weight);
  cfg.weighting.validate();

  cfg.integration.method = parse_integration_method(e.str("integration.method", "analytic-cdf"));
  cfg.integration.nodes = e.count("integration.nodes", 8);
  cfg.integration.samples = e.count("integration.samples", 100000);
  cfg.integration.seed = e.count("integration.seed", 0);
  cfg.integration.validate();

  cfg.sweep.steps = parse_steps(e.str("sweep.steps", ""));
  if (cfg.sweep.steps.empty()) cfg.sweep.steps = {static_cast<int>(cfg.grid_n)};
  const std::string grule = e.str("sweep.grid_rule", "identity");
  if (grule == "identity")
    cfg.sweep.grid_rule = SweepSpec::GridRule::Identity;
  else if (grule == "refined-truncation")
    cfg.sweep.grid_rule = SweepSpec::GridRule::RefinedTruncation;
  else
    fail(ErrorKind::Input, "sweep.grid_rule must be 'identity' or 'refined-truncation'");
  const std::string arule = e.str("sweep.action_rule", "fixed");
  if (arule == "fixed")
    cfg.sweep.action_rule = SweepSpec::ActionRule::Fixed;
  else if (arule == "multiple")
    cfg.sweep.action_rule = SweepSpec::ActionRule::Multiple;
  else if (arule == "refined-truncation")
    cfg.sweep.action_rule = SweepSpec::ActionRule::RefinedTruncation;
  else
    fail(ErrorKind::Input, "sweep.action_rule must be 'fixed', 'multiple' or 'refined-truncation'");
  cfg.sweep.action_multiplier = e.real("sweep.action_multiplier", 5.0);
  cfg.sweep.k_slope = e.real("sweep.k_slope", 5.0);
  cfg.sweep.k_divisor = static_cast<int>(e.count("sweep.k_divisor", 3));
  require(cfg.sweep.action_multiplier > 0.0 && cfg.sweep.k_slope > 0.0 && cfg.sweep.k_divisor >= 1,
          "sweep action-grid parameters must be positive");
  if (cfg.sweep.grid_rule == SweepSpec::GridRule::RefinedTruncation)
    require(cfg.truncation.has_value(), "sweep.grid_rule = refined-truncation needs a truncation schedule");

  const std::string crit = e.str("solver.criterion", "discounted");
  if (crit == "discounted")
    cfg.solver.criterion = Criterion::Discounted;
  else if (crit == "average")
    cfg.solver.criterion = Criterion::Average;
  else
    fail(ErrorKind::Input, "solver.criterion must be 'discounted' or 'average'");
  cfg.solver.tol = e.real("solver.tol", 1e-8);
  cfg.solver.max_iters = e.count("solver.max_iters", 0);
  cfg.solver.damping = e.real("solver.damping", 0.5);
  cfg.solver.ref_state = e.count("solver.ref_state", 0);
  require(cfg.solver.tol > 0.0, "solver.tol must be positive");
  require(cfg.solver.damping > 0.0 && cfg.solver.damping <= 1.0, "solver.damping must lie in (0, 1]");

  cfg.eval.x0 = parse_x0(e.str("eval.x0", "0"));
  cfg.eval.rollout = e.flag("eval.rollout", false);
  cfg.eval.episodes = e.count("eval.episodes", 1000);
  cfg.eval.seed = e.count("eval.seed", 1);
  cfg.eval.tail_tol = e.real("eval.tail_tol", 1e-4);
  cfg.eval.horizon = e.count("eval.horizon", 1000);
  require(cfg.eval.episodes >= 1 && cfg.eval.horizon >= 1, "eval.episodes and eval.horizon must be >= 1");
  require(cfg.eval.tail_tol > 0.0, "eval.tail_tol must be positive");

  cfg.output_csv = e.str("output.csv", "");
  cfg.precision = static_cast<int>(e.count("output.precision", 17));
  require(cfg.precision >= 1 && cfg.precision <= 17, "output.precision must lie in [1, 17]");
  return cfg;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  require(key.find('.') != std::string::npos, "override key must look like section.key, got '" + key + "'");
  auto copy = entries;
  copy[key] = value;
  *this = from_entries(std::move(copy));
}

std::string ExperimentConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = entries.find(key);
  return it == entries.end() ? fallback : it->second;
}

ExperimentConfig parse_config(std::string_view ini_text) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(ini_text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& ex) {
    fail(ErrorKind::Input, std::string("config parse error: ") + ex.what());
  }
  std::map<std::string, std::string> flat;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      flat[section] = trim(body.data());
      continue;
    }
    for (const auto& [key, leaf] : body) flat[section + "." + key] = trim(leaf.data());
  }
  return ExperimentConfig::from_entries(std::move(flat));
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string preset_text(std::string_view name) {
  if (name == "fig1") return kFig1;
  if (name == "fig2") return kFig2;
  if (name == "slb") return kSlb;
  fail(ErrorKind::Input, "unknown preset '" + std::string(name) + "' (expected fig1, fig2 or slb)");
}

ExperimentConfig preset(std::string_view name) { return parse_config(preset_text(name)); }

// --- models -----------------------------------------------------------------

ContinuousMdp make_model(const ExperimentConfig& cfg) {
  const Entries e(cfg.entries);
  if (cfg.model_name == "additive_noise") {
    AdditiveNoiseParams p;
    p.dynamics = e.str("model.F", p.dynamics);
    p.beta = e.real("model.beta", p.beta);
    const std::string fam = e.str("model.noise", "gaussian");
    if (fam == "gaussian")
      p.noise_family = NoiseSpec::Family::Gaussian;
    else if (fam == "uniform")
      p.noise_family = NoiseSpec::Family::Uniform;
    else
      fail(ErrorKind::Input, "model.noise must be 'gaussian' or 'uniform'");
    p.sigma = e.real("model.sigma", p.sigma);
    p.noise_mean = e.real("model.noise_mean", p.noise_mean);
    p.lambda = e.real("model.lambda", p.lambda);
    p.action_halfwidth = e.real("model.action_halfwidth", e.real("model.L", p.action_halfwidth));
    p.action_lo = e.opt_real("model.action_lo");
    p.action_hi = e.opt_real("model.action_hi");
    const std::string cost = e.str("model.cost", "quadratic");
    if (cost == "quadratic")
      p.cost = AdditiveNoiseParams::CostKind::Quadratic;
    else if (cost == "abs")
      p.cost = AdditiveNoiseParams::CostKind::Absolute;
    else
      fail(ErrorKind::Input, "model.cost must be 'quadratic' or 'abs'");
    p.weight_k = e.real("model.weight_k", p.weight_k);
    p.dim = e.count("model.dim", 1);
    p.bounded = e.flag("model.bounded", false);
    p.state_lo = e.real("model.state_lo", p.state_lo);
    p.state_hi = e.real("model.state_hi", p.state_hi);
    p.cost_bound = e.opt_real("model.cost_bound");
    if (cfg.truncation) {
      const int last = *std::max_element(cfg.sweep.steps.begin(), cfg.sweep.steps.end());
      p.l_max = cfg.truncation->half_width(last);
    }
    p.l_max = e.real("model.l_max", p.l_max);
    return make_additive_noise(p);
  }
  if (cfg.model_name == "ricker") {
    RickerParams p;
    p.theta1 = e.real("model.theta1", p.theta1);
    p.theta2 = e.real("model.theta2", p.theta2);
    p.kappa_min = e.real("model.kappa_min", p.kappa_min);
    p.kappa_max = e.real("model.kappa_max", p.kappa_max);
    p.lambda = e.real("model.lambda", p.lambda);
    p.beta = e.real("model.beta", p.beta);
    return make_ricker(p);
  }
  if (cfg.model_name == "embedded") {
    const std::string path = e.str("model.file", "");
    require(!path.empty(), "model.name = embedded needs model.file");
    const FiniteMdp fm = load_finite_mdp(path);
    std::vector<double> cost = fm.cost_matrix();
    if (fm.maximize)
      for (double& c : cost) c = -c;
    return make_atomic_embedding(fm.n_states(), fm.n_actions(), std::move(cost), fm.transition_tensor(), fm.beta(),
                                 fm.maximize ? Sense::Maximize : Sense::Minimize);
  }
  fail(ErrorKind::Input, "unknown model '" + cfg.model_name + "' (expected additive_noise, ricker or embedded)");
}

// --- steps ------------------------------------------------------------------

StepPlan plan_step(const ExperimentConfig& cfg, const ContinuousMdp& model, int step) {
  require(step >= 1, "sweep step must be at least 1");
  StepPlan plan;
  plan.step = step;
  const int m = (step + cfg.sweep.k_divisor - 1) / cfg.sweep.k_divisor;
  const double k_m = cfg.sweep.k_slope * m;

  if (cfg.truncation) {
    plan.compact = truncation_schedule(model, *cfg.truncation, step);
  } else {
    require(!model.state_space.unbounded, "model '" + model.name + "' has an unbounded state space; configure truncation.schedule");
  }

  switch (cfg.sweep.grid_rule) {
    case SweepSpec::GridRule::Identity:
      plan.grid_n = static_cast<std::size_t>(step);
      break;
    case SweepSpec::GridRule::RefinedTruncation:
      plan.grid_n = static_cast<std::size_t>(ceil_guarded(2.0 * k_m * cfg.truncation->half_width(step)));
      break;
  }
  switch (cfg.sweep.action_rule) {
    case SweepSpec::ActionRule::Fixed:
      plan.action_k = cfg.action_k;
      break;
    case SweepSpec::ActionRule::Multiple:
      plan.action_k = static_cast<std::size_t>(ceil_guarded(cfg.sweep.action_multiplier * step));
      break;
    case SweepSpec::ActionRule::RefinedTruncation:
      plan.action_k = static_cast<std::size_t>(ceil_guarded(2.0 * k_m));
      break;
  }
  require(plan.grid_n >= 1 && plan.action_k >= 1, "step produced an empty grid");
  return plan;
}

StepModel build_step(const ExperimentConfig& cfg, const ContinuousMdp& model, int step, int jobs) {
  StepPlan plan = plan_step(cfg, model, step);
  const BoxSpace& region = plan.compact ? plan.compact->truncation : model.state_space;
  Quantizer sq = build_uniform_grid(region, plan.grid_n);
  Quantizer aq = build_action_grid(model.action_space, plan.action_k);
  FiniteMdp fm = plan.compact ? build_finite_mdp(model, sq, aq, cfg.weighting, cfg.integration, *plan.compact, jobs)
                              : build_finite_mdp(model, sq, aq, cfg.weighting, cfg.integration, jobs);
  return StepModel{std::move(plan), std::move(sq), std::move(aq), std::move(fm)};
}

SolveResult solve_step(const ExperimentConfig& cfg, const FiniteMdp& fm, int jobs) {
  const SolverSpec& s = cfg.solver;
  if (s.criterion == Criterion::Discounted)
    return value_iteration(fm, s.tol, s.max_iters ? s.max_iters : 1'000'000, jobs);
  return relative_value_iteration(fm, s.tol, s.damping, s.ref_state, s.max_iters ? s.max_iters : 100'000, jobs);
}

std::size_t x0_state(const StepModel& sm, std::span<const double> x0) {
  require(x0.size() == sm.state_q.dim(), "x0 dimension mismatch");
  if (sm.plan.compact && !sm.plan.compact->truncation.contains(x0))
    return sm.plan.compact->pseudo_state_index(sm.state_q);
  return sm.state_q.quantize(x0);
}

double lookahead_value(const ContinuousMdp& model, const StepModel& sm, std::span<const double> values,
                       std::span<const double> x0) {
  require(values.size() == sm.fm.n_states(), "value vector does not match the finite model");
  const Quantizer& q = sm.state_q;
  require(q.is_cartesian(), "lookahead needs a cartesian state grid");
  const std::size_t d = q.dim();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> faces(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto& ax = q.axes()[j];
    faces[j].push_back(sm.plan.compact ? sm.plan.compact->truncation.lo[j] : -inf);
    for (std::size_t k = 1; k < ax.size(); ++k) faces[j].push_back(0.5 * (ax[k - 1] + ax[k]));
    faces[j].push_back(sm.plan.compact ? sm.plan.compact->truncation.hi[j] : inf);
  }
  std::vector<BoxSpace> cells;
  cells.reserve(q.size());
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t flat = 0; flat < q.size(); ++flat) {
    std::vector<double> lo(d), hi(d);
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = faces[j][idx[j]];
      hi[j] = faces[j][idx[j] + 1];
    }
    cells.emplace_back(std::move(lo), std::move(hi), true);
    for (std::size_t j = d; j-- > 0;) {
      if (++idx[j] < q.axes()[j].size()) break;
      idx[j] = 0;
    }
  }
  double best = inf;
  for (const State& a : sm.action_q.points()) {
    double ev = 0.0, inside = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double p = cell_probability(model, x0, a, cells[c]);
      ev += p * values[c];
      inside += p;
    }
    if (sm.plan.compact) ev += std::max(0.0, 1.0 - inside) * values[sm.plan.compact->pseudo_state_index(q)];
    best = std::min(best, signed_cost(model, x0, a) + model.beta * ev);
  }
  return best;
}

// --- pipelines --------------------------------------------------------------

std::vector<PipelineRow> run_pipeline(const ExperimentConfig& cfg, int jobs) {
  const ContinuousMdp model = make_model(cfg);
  std::vector<PipelineRow> rows;
  for (int step : cfg.sweep.steps) {
    PipelineRow row;
    row.n = step;
    row.seed = cfg.eval.seed;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const StepModel sm = build_step(cfg, model, step, jobs);
      row.states = sm.fm.n_states();
      row.actions = sm.fm.n_actions();
      const SolveResult res = solve_step(cfg, sm.fm, jobs);
      row.residual = res.residual;
      const double sign = sm.fm.maximize ? -1.0 : 1.0;
      if (cfg.solver.criterion == Criterion::Average) {
        row.value_at_x0 = sign * *res.gain;
      } else {
        require(cfg.eval.x0.has_value(), "the discounted value at x0 needs a fixed eval.x0");
        row.value_at_x0 = sign * res.values[x0_state(sm, *cfg.eval.x0)];
        row.lookahead_at_x0 = sign * lookahead_value(model, sm, res.values, *cfg.eval.x0);
        row.has_lookahead = true;
      }
      if (cfg.eval.rollout) {
        const ExtendedPolicy pol = extend_policy(res, sm.state_q, sm.action_q, sm.plan.compact);
        RolloutOptions opts;
        opts.episodes = cfg.eval.episodes;
        opts.seed = cfg.eval.seed;
        opts.jobs = jobs;
        const RolloutReport rep = cfg.solver.criterion == Criterion::Discounted
                                      ? rollout_discounted(model, pol, cfg.eval.x0, cfg.eval.tail_tol, opts)
                                      : rollout_average(model, pol, cfg.eval.x0, cfg.eval.horizon, opts);
        row.rollout_estimate = rep.estimate;
        row.rollout_stderr = rep.std_error;
        row.has_rollout = true;
      }
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
    row.wall_ms = elapsed_ms(t0);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_real(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

void write_pipeline_csv(std::ostream& out, const std::vector<PipelineRow>& rows, int precision, bool include_wall) {
  out << "n,states,actions,value_at_x0,bellman_residual_or_span,rollout_estimate,rollout_stderr,"
      << (include_wall ? "wall_ms," : "") << "seed,lookahead_at_x0,error\n";
  for (const PipelineRow& r : rows) {
    const bool ok = r.error.empty();
    out << r.n << ',' << r.states << ',' << r.actions << ',' << (ok ? format_real(r.value_at_x0, precision) : "")
        << ',' << (ok ? format_real(r.residual, precision) : "") << ','
        << (r.has_rollout ? format_real(r.rollout_estimate, precision) : "") << ','
        << (r.has_rollout ? format_real(r.rollout_stderr, precision) : "") << ',';
    if (include_wall) out << format_real(r.wall_ms, 6) << ',';
    out << r.seed << ',' << (ok && r.has_lookahead ? format_real(r.lookahead_at_x0, precision) : "") << ','
        << csv_field(r.error) << '\n';
  }
}

std::vector<OrderRow> run_order_optimality(const ExperimentConfig& cfg, int jobs) {
  const ContinuousMdp model = make_model(cfg);
  const NoiseSpec* noise = model.noise();
  require(noise != nullptr, "order-optimality needs a model with a noise law");
  const double h_g = noise->entropy_bits();
  require(std::isfinite(h_g), "order-optimality needs noise with finite differential entropy");
  const int d = static_cast<int>(model.state_space.dim());

  std::vector<OrderRow> rows;
  for (int step : cfg.sweep.steps) {
    OrderRow row;
    row.n = step;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const StepModel sm = build_step(cfg, model, step, jobs);
      const SolveResult res = solve_step(cfg, sm.fm, jobs);
      const ExtendedPolicy pol = extend_policy(res, sm.state_q, sm.action_q, sm.plan.compact);
      RolloutOptions opts;
      opts.episodes = cfg.eval.episodes;
      opts.seed = cfg.eval.seed;
      opts.jobs = jobs;
      const RolloutReport rep = per_stage_distortion(model, pol, cfg.eval.x0, cfg.eval.horizon, opts);
      row.min_distortion = rep.estimate;
      row.std_error = rep.std_error;
      row.argmin_stage = static_cast<std::size_t>(
          std::min_element(rep.per_stage.begin(), rep.per_stage.end()) - rep.per_stage.begin());
      row.slb_floor = slb_floor(d, h_g, static_cast<long>(sm.state_q.size()));
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
    row.wall_ms = elapsed_ms(t0);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_order_csv(std::ostream& out, const std::vector<OrderRow>& rows, int precision) {
  out << "n,min_distortion,std_error,argmin_stage,slb_floor,wall_ms,error\n";
  for (const OrderRow& r : rows) {
    const bool ok = r.error.empty();
    out << r.n << ',' << (ok ? format_real(r.min_distortion, precision) : "") << ','
        << (ok ? format_real(r.std_error, precision) : "") << ',' << r.argmin_stage << ','
        << (ok ? format_real(r.slb_floor, precision) : "") << ',' << format_real(r.wall_ms, 6) << ','
        << csv_field(r.error) << '\n';
  }
}

bool emit_plot_data(const std::vector<PipelineRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  std::size_t written = 0;
  for (const PipelineRow& r : rows) {
    if (!r.error.empty()) continue;
    out << r.n << ' ' << format_real(r.value_at_x0, 17) << '\n';
    ++written;
  }
  if (!out) fail(ErrorKind::Io, "write to '" + path + "' failed");
  return written > 0;
}

std::vector<std::pair<double, double>> read_plot_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::vector<std::pair<double, double>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string a, b;
    if (!(ls >> a >> b)) fail(ErrorKind::Io, "bad plot data line '" + line + "' in '" + path + "'");
    out.emplace_back(Entries::parse_real("n", a), Entries::parse_real("value", b));
  }
  return out;
}

}  // namespace qmdp
