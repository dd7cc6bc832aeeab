#include "qmdp/finite_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "qmdp/error.hpp"
#include "qmdp/parallel.hpp"
#include "qmdp/quadrature.hpp"

namespace qmdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kAnalyticRowTol = 1e-6;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Geometry of the partition induced by a cartesian state grid. Interval
// semantics are (lo, hi] per axis; the outer faces are infinite for a compact
// build and the truncation faces for a truncated one.
struct CellGeometry {
  std::vector<std::vector<double>> bounds;      // per axis: n_k + 1 boundaries
  std::vector<std::vector<double>> log_bounds;  // log of bounds (ricker kernel)
  std::vector<std::vector<double>> region_lo;   // weighting region per axis cell
  std::vector<std::vector<double>> region_hi;
  bool truncated = false;
  BoxSpace truncation;
};

CellGeometry make_geometry(const Quantizer& q, const Compactification* compact) {
  CellGeometry g;
  g.truncated = compact != nullptr;
  if (compact) g.truncation = compact->truncation;
  const auto& axes = q.axes();
  const BoxSpace& space = q.space();
  g.bounds.resize(axes.size());
  g.log_bounds.resize(axes.size());
  g.region_lo.resize(axes.size());
  g.region_hi.resize(axes.size());
  for (std::size_t j = 0; j < axes.size(); ++j) {
    const auto& ax = axes[j];
    auto& b = g.bounds[j];
    b.resize(ax.size() + 1);
    b.front() = compact ? compact->truncation.lo[j] : -kInf;
    b.back() = compact ? compact->truncation.hi[j] : kInf;
    for (std::size_t k = 1; k < ax.size(); ++k) b[k] = 0.5 * (ax[k - 1] + ax[k]);
    g.log_bounds[j].resize(b.size());
    for (std::size_t k = 0; k < b.size(); ++k)
      g.log_bounds[j][k] = b[k] <= 0.0 ? -kInf : (std::isinf(b[k]) ? kInf : std::log(b[k]));
    g.region_lo[j].resize(ax.size());
    g.region_hi[j].resize(ax.size());
    for (std::size_t k = 0; k < ax.size(); ++k) {
      g.region_lo[j][k] = std::max(b[k], space.lo[j]);
      g.region_hi[j][k] = std::min(b[k + 1], space.hi[j]);
    }
  }
  return g;
}

struct WeightedNode {
  State z;
  double w;
};

// Nodes of the weighting measure restricted to grid cell `flat`.
std::vector<WeightedNode> cell_nodes(const Quantizer& q, const CellGeometry& g, std::size_t flat,
                                     const WeightingSpec& weighting, const QuadratureRule& rule) {
  const bool uniform = weighting.kind == WeightingSpec::Kind::UniformOnCell ||
                       weighting.kind == WeightingSpec::Kind::Mixture;
  if (!uniform) return {{q.point(flat), 1.0}};
  if (weighting.kind == WeightingSpec::Kind::Mixture && weighting.mixture_weight <= 0.0)
    fail(ErrorKind::Build, "mixture weight 0 puts no weighting mass on grid cell " + std::to_string(flat));

  const std::size_t d = q.dim();
  // Per-axis cell index of `flat` (row-major).
  std::vector<std::size_t> idx(d);
  std::size_t rem = flat;
  for (std::size_t j = d; j-- > 0;) {
    idx[j] = rem % q.axes()[j].size();
    rem /= q.axes()[j].size();
  }
  const std::size_t m = rule.nodes.size();
  std::size_t total = 1;
  for (std::size_t j = 0; j < d; ++j) total *= m;
  std::vector<WeightedNode> nodes;
  nodes.reserve(total);
  std::vector<std::size_t> k(d, 0);
  for (std::size_t t = 0; t < total; ++t) {
    WeightedNode node{State(d), 1.0};
    for (std::size_t j = 0; j < d; ++j) {
      const double lo = g.region_lo[j][idx[j]];
      const double hi = g.region_hi[j][idx[j]];
      node.z[j] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * rule.nodes[k[j]];
      node.w *= 0.5 * rule.weights[k[j]];
    }
    nodes.push_back(std::move(node));
    for (std::size_t j = d; j-- > 0;) {
      if (++k[j] < m) break;
      k[j] = 0;
    }
  }
  return nodes;
}

// Adds w * p(cell_j | z, a) into row[j] for grid cells and returns the weighted
// mass outside the grid region (pseudo-state mass for a truncated build).
double accumulate_kernel(const ContinuousMdp& model, const Quantizer& q, const CellGeometry& g,
                         std::span<const double> z, std::span<const double> a, double w,
                         std::span<double> row) {
  const std::size_t d = q.dim();
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, AtomicKernel>) {
          const auto src = k.row(k.state_atoms.quantize(z), k.action_atoms.quantize(a));
          double outside = 0.0;
          for (std::size_t j = 0; j < src.size(); ++j) {
            if (src[j] == 0.0) continue;
            const State& atom = k.state_atoms.point(j);
            bool inside = true;
            if (g.truncated)
              for (std::size_t dd = 0; dd < d; ++dd)
                inside = inside && atom[dd] > g.truncation.lo[dd] && atom[dd] <= g.truncation.hi[dd];
            if (inside)
              row[q.quantize(atom)] += w * src[j];
            else
              outside += w * src[j];
          }
          return outside;
        } else {
          // Product-form kernels: per-axis interval masses from the noise CDF.
          std::vector<std::vector<double>> axis_mass(d);
          double inside_total = 1.0;
          if constexpr (std::is_same_v<K, AdditiveKernel>) {
            const State mean = k.dynamics(z, a);
            for (std::size_t j = 0; j < d; ++j) {
              const auto& b = g.bounds[j];
              auto& mass = axis_mass[j];
              mass.resize(b.size() - 1);
              double prev = k.noise.cdf(b[0] - mean[j]);
              const double first = prev;
              for (std::size_t c = 0; c + 1 < b.size(); ++c) {
                const double next = k.noise.cdf(b[c + 1] - mean[j]);
                mass[c] = std::max(0.0, next - prev);
                prev = next;
              }
              inside_total *= std::clamp(prev - first, 0.0, 1.0);
            }
          } else {
            const double log_y = std::log(k.scale(z[0], a[0]));
            const auto& lb = g.log_bounds[0];
            auto& mass = axis_mass[0];
            mass.resize(lb.size() - 1);
            double prev = k.noise.cdf(lb[0] - log_y);
            const double first = prev;
            for (std::size_t c = 0; c + 1 < lb.size(); ++c) {
              const double next = k.noise.cdf(lb[c + 1] - log_y);
              mass[c] = std::max(0.0, next - prev);
              prev = next;
            }
            inside_total = std::clamp(prev - first, 0.0, 1.0);
          }
          if (d == 1) {
            for (std::size_t c = 0; c < axis_mass[0].size(); ++c) row[c] += w * axis_mass[0][c];
          } else {
            std::vector<std::size_t> idx(d, 0);
            for (std::size_t flat = 0; flat < q.size(); ++flat) {
              double p = w;
              for (std::size_t j = 0; j < d; ++j) p *= axis_mass[j][idx[j]];
              row[flat] += p;
              for (std::size_t j = d; j-- > 0;) {
                if (++idx[j] < axis_mass[j].size()) break;
                idx[j] = 0;
              }
            }
          }
          return w * (1.0 - inside_total);
        }
      },
      model.kernel);
}

State sample_in_cell(const CellGeometry& g, const Quantizer& q, std::size_t flat, Rng& rng) {
  const std::size_t d = q.dim();
  std::vector<std::size_t> idx(d);
  std::size_t rem = flat;
  for (std::size_t j = d; j-- > 0;) {
    idx[j] = rem % q.axes()[j].size();
    rem /= q.axes()[j].size();
  }
  State z(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double lo = g.region_lo[j][idx[j]];
    const double hi = g.region_hi[j][idx[j]];
    z[j] = lo + (hi - lo) * uniform01(rng);
  }
  return z;
}

FiniteMdp build_impl(const ContinuousMdp& model, const Quantizer& state_q, const Quantizer& action_q,
                     const WeightingSpec& weighting, const IntegrationSpec& ispec,
                     const Compactification* compact, int jobs) {
  model.validate();
  weighting.validate();
  ispec.validate();
  require(state_q.is_cartesian(), "finite model construction needs a cartesian state grid");
  require(state_q.dim() == model.state_space.dim(), "state grid dimension does not match the model");
  require(action_q.dim() == model.action_space.dim(), "action grid dimension does not match the model");
  if (std::holds_alternative<RickerKernel>(model.kernel))
    require(state_q.dim() == 1, "ricker kernel is one-dimensional");
  if (compact) {
    const BoxSpace& k = compact->truncation;
    require(k.dim() == state_q.dim(), "truncation dimension does not match the state grid");
    for (std::size_t j = 0; j < k.dim(); ++j)
      require(std::abs(state_q.space().lo[j] - k.lo[j]) <= 1e-12 &&
                  std::abs(state_q.space().hi[j] - k.hi[j]) <= 1e-12,
              "state grid must be built on the truncation " + k.describe());
  } else {
    require(!model.state_space.unbounded,
            "model '" + model.name + "' has an unbounded state space; build it with a truncation");
  }
  if (compact && weighting.kind == WeightingSpec::Kind::Mixture && weighting.mixture_weight >= 1.0)
    fail(ErrorKind::Build, "mixture weight 1 puts no weighting mass outside the truncation");

  const CellGeometry geom = make_geometry(state_q, compact);
  const std::size_t n_grid = state_q.size();
  const std::size_t ns = n_grid + (compact ? 1 : 0);
  const std::size_t na = action_q.size();
  const State outside = compact ? compact->resolve_outside_point(state_q) : State{};

  FiniteMdp fm(ns, na, model.beta);
  fm.maximize = model.sense == Sense::Maximize;

  const bool mc = ispec.method == IntegrationSpec::Method::MonteCarlo;
  const QuadratureRule rule = gauss_legendre(ispec.method == IntegrationSpec::Method::GaussLegendre
                                                 ? ispec.nodes
                                                 : std::size_t{8});
  const bool uniform_cells = weighting.kind != WeightingSpec::Kind::PointMass;

  auto& trans = fm.transition_tensor();
  std::vector<double> costs(ns * na, 0.0);

  parallel_for(ns * na, jobs, [&](std::size_t r) {
    const std::size_t i = r / na;
    const std::size_t a = r % na;
    const State& act = action_q.point(a);
    std::span<double> row(trans.data() + r * ns, ns);
    std::span<double> grid_row = row.first(n_grid);
    const bool pseudo = compact && i == n_grid;

    if (mc) {
      Rng rng = make_stream(ispec.seed, r);
      std::vector<double> counts(ns, 0.0);
      double csum = 0.0;
      for (std::size_t s = 0; s < ispec.samples; ++s) {
        State z = pseudo ? outside
                         : (uniform_cells ? sample_in_cell(geom, state_q, i, rng) : state_q.point(i));
        csum += signed_cost(model, z, act);
        const State next = sample_next(model, z, act, rng);
        if (compact && !compact->truncation.contains(next))
          counts[n_grid] += 1.0;
        else
          counts[state_q.quantize(next)] += 1.0;
      }
      const double n = static_cast<double>(ispec.samples);
      for (std::size_t j = 0; j < ns; ++j) row[j] = counts[j] / n;
      costs[r] = csum / n;
      return;
    }

    std::vector<WeightedNode> nodes =
        pseudo ? std::vector<WeightedNode>{{outside, 1.0}} : cell_nodes(state_q, geom, i, weighting, rule);
    double c = 0.0;
    double out_mass = 0.0;
    for (const auto& node : nodes) {
      c += node.w * signed_cost(model, node.z, act);
      out_mass += accumulate_kernel(model, state_q, geom, node.z, act, node.w, grid_row);
    }
    if (compact) row[n_grid] = out_mass;
    if (!std::isfinite(c))
      fail(ErrorKind::Numeric, "non-finite cost at state " + std::to_string(i) + ", action " + std::to_string(a));
    costs[r] = c;
  });

  for (std::size_t r = 0; r < ns * na; ++r) fm.cost(r / na, r % na) = costs[r];

  const double tol = mc ? std::max(kAnalyticRowTol, 5.0 * 0.5 / std::sqrt(static_cast<double>(ispec.samples)))
                        : kAnalyticRowTol;
  const NormalizationReport norm = normalize_rows(trans, ns, na, tol);

  auto& prov = fm.provenance;
  prov.model_name = model.name;
  prov.seed = mc ? ispec.seed : 0;
  prov.integration = ispec.describe();
  prov.weighting = weighting.describe();
  prov.state_grid = state_q.describe();
  prov.action_grid = action_q.describe();
  prov.truncation = compact ? compact->truncation.describe() : "none";
  prov.normalization_residual = norm.max_residual;
  prov.memory_bytes = (trans.size() + ns * na) * sizeof(double);
  std::ostringstream extra;
  extra.precision(17);
  bool first = true;
  for (const auto& [k, v] : model.params) {
    extra << (first ? "" : ";") << k << '=' << v;
    first = false;
  }
  if (compact) {
    extra << (first ? "" : ";") << "outside_point=" << outside[0];
  }
  prov.extra = extra.str();
  return fm;
}

}  // namespace

// --- FiniteMdp --------------------------------------------------------------

FiniteMdp::FiniteMdp(std::size_t n_states, std::size_t n_actions, double beta)
    : n_states_(n_states),
      n_actions_(n_actions),
      beta_(beta),
      cost_(n_states * n_actions, 0.0),
      trans_(n_states * n_actions * n_states, 0.0) {
  require(n_states > 0 && n_actions > 0, "finite MDP needs at least one state and one action");
  require(beta > 0.0 && beta < 1.0, "discount beta must lie in (0, 1)");
}

FiniteMdp::FiniteMdp(std::size_t n_states, std::size_t n_actions, double beta, std::vector<double> cost,
                     std::vector<double> trans)
    : FiniteMdp(n_states, n_actions, beta) {
  require(cost.size() == cost_.size(), "cost matrix has the wrong size");
  require(trans.size() == trans_.size(), "transition tensor has the wrong size");
  cost_ = std::move(cost);
  trans_ = std::move(trans);
}

void FiniteMdp::check_invariants(double row_tol) const {
  for (std::size_t i = 0; i < n_states_; ++i)
    for (std::size_t a = 0; a < n_actions_; ++a) {
      if (!std::isfinite(cost(i, a)))
        fail(ErrorKind::Numeric, "non-finite cost at (" + std::to_string(i) + "," + std::to_string(a) + ")");
      double s = 0.0;
      for (double v : row(i, a)) {
        if (!(v >= 0.0 && v <= 1.0))
          fail(ErrorKind::Build, "transition entry outside [0,1] in row (" + std::to_string(i) + "," +
                                     std::to_string(a) + ")");
        s += v;
      }
      if (std::abs(s - 1.0) > row_tol)
        fail(ErrorKind::Build, "row (" + std::to_string(i) + "," + std::to_string(a) + ") sums to " + fmt17(s));
    }
}

bool FiniteMdp::identical(const FiniteMdp& o) const noexcept {
  auto same_bits = [](const std::vector<double>& x, const std::vector<double>& y) {
    return x.size() == y.size() && (x.empty() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
  };
  return n_states_ == o.n_states_ && n_actions_ == o.n_actions_ &&
         std::memcmp(&beta_, &o.beta_, sizeof(double)) == 0 && maximize == o.maximize &&
         same_bits(cost_, o.cost_) && same_bits(trans_, o.trans_);
}

// --- integration spec -------------------------------------------------------

void IntegrationSpec::validate() const {
  if (method == Method::GaussLegendre) require(nodes >= 1, "gauss-legendre integration needs m >= 1");
  if (method == Method::MonteCarlo) require(samples >= 1, "monte carlo integration needs N >= 1");
}

std::string IntegrationSpec::describe() const {
  switch (method) {
    case Method::AnalyticCdf: return "analytic-cdf";
    case Method::GaussLegendre: return "gauss-legendre(" + std::to_string(nodes) + ")";
    case Method::MonteCarlo:
      return "monte-carlo(" + std::to_string(samples) + "," + std::to_string(seed) + ")";
  }
  return "?";
}

IntegrationSpec::Method parse_integration_method(const std::string& s) {
  if (s == "analytic-cdf" || s == "analytic") return IntegrationSpec::Method::AnalyticCdf;
  if (s == "gauss-legendre") return IntegrationSpec::Method::GaussLegendre;
  if (s == "monte-carlo") return IntegrationSpec::Method::MonteCarlo;
  fail(ErrorKind::Input, "unknown integration method '" + s + "'");
}

// --- construction -----------------------------------------------------------

NormalizationReport normalize_rows(std::span<double> trans, std::size_t n_states, std::size_t n_actions,
                                   double tol) {
  require(trans.size() == n_states * n_actions * n_states, "tensor size does not match its shape");
  NormalizationReport rep;
  for (std::size_t r = 0; r < n_states * n_actions; ++r) {
    std::span<double> row = trans.subspan(r * n_states, n_states);
    double s = 0.0;
    for (double v : row) s += v;
    const double dev = std::abs(s - 1.0);
    if (!(dev <= tol))
      fail(ErrorKind::Build, "row sum " + fmt17(s) + " at state " + std::to_string(r / n_actions) +
                                 ", action " + std::to_string(r % n_actions) + " is outside 1 +/- " + fmt17(tol));
    if (dev > rep.max_residual) {
      rep.max_residual = dev;
      rep.worst_state = r / n_actions;
      rep.worst_action = r % n_actions;
    }
    if (s != 1.0)
      for (double& v : row) v /= s;
  }
  return rep;
}

FiniteMdp build_finite_mdp(const ContinuousMdp& model, const Quantizer& state_q, const Quantizer& action_q,
                           const WeightingSpec& weighting, const IntegrationSpec& ispec, int jobs) {
  return build_impl(model, state_q, action_q, weighting, ispec, nullptr, jobs);
}

FiniteMdp build_finite_mdp(const ContinuousMdp& model, const Quantizer& state_q, const Quantizer& action_q,
                           const WeightingSpec& weighting, const IntegrationSpec& ispec,
                           const Compactification& compact, int jobs) {
  return build_impl(model, state_q, action_q, weighting, ispec, &compact, jobs);
}

FiniteMdp build_truncated_mdp(const ContinuousMdp& model, const TruncationSchedule& schedule, int step,
                              const Quantizer& state_q, const Quantizer& action_q,
                              const WeightingSpec& weighting, const IntegrationSpec& ispec, int jobs) {
  const Compactification compact = truncation_schedule(model, schedule, step);
  return build_impl(model, state_q, action_q, weighting, ispec, &compact, jobs);
}

// --- text format ------------------------------------------------------------

void write_finite_mdp(std::ostream& out, const FiniteMdp& fm) {
  const auto& p = fm.provenance;
  out << "finite_mdp " << fm.n_states() << ' ' << fm.n_actions() << ' ' << fmt17(fm.beta()) << ' ' << p.seed
      << '\n';
  out << "# maximize = " << (fm.maximize ? 1 : 0) << '\n';
  out << "# model = " << p.model_name << '\n';
  out << "# integration = " << p.integration << '\n';
  out << "# weighting = " << p.weighting << '\n';
  out << "# state_grid = " << p.state_grid << '\n';
  out << "# action_grid = " << p.action_grid << '\n';
  out << "# truncation = " << p.truncation << '\n';
  out << "# normalization_residual = " << fmt17(p.normalization_residual) << '\n';
  out << "# memory_bytes = " << p.memory_bytes << '\n';
  out << "# params = " << p.extra << '\n';
  for (std::size_t i = 0; i < fm.n_states(); ++i) {
    for (std::size_t a = 0; a < fm.n_actions(); ++a) out << (a ? " " : "") << fmt17(fm.cost(i, a));
    out << '\n';
  }
  for (std::size_t i = 0; i < fm.n_states(); ++i)
    for (std::size_t a = 0; a < fm.n_actions(); ++a) {
      const auto row = fm.row(i, a);
      for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << fmt17(row[j]);
      out << '\n';
    }
}

FiniteMdp read_finite_mdp(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Io, "empty finite MDP stream");
  std::istringstream head(line);
  std::string magic, beta_text;
  std::size_t ns = 0, na = 0;
  std::uint64_t seed = 0;
  if (!(head >> magic >> ns >> na >> beta_text >> seed) || magic != "finite_mdp")
    fail(ErrorKind::Io, "bad finite MDP header: '" + line + "'");
  FiniteMdp fm(ns, na, std::strtod(beta_text.c_str(), nullptr));
  fm.provenance.seed = seed;

  auto next_number = [&](std::istringstream& ls) -> double {
    std::string tok;
    if (!(ls >> tok)) fail(ErrorKind::Io, "finite MDP row is too short");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) fail(ErrorKind::Io, "bad number '" + tok + "' in finite MDP");
    return v;
  };
  auto next_data_line = [&]() -> std::istringstream {
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] == '#') {
        const auto eq = line.find('=');
        if (eq != std::string::npos) {
          std::string key = line.substr(1, eq - 1);
          std::string val = line.substr(eq + 1);
          auto trim = [](std::string& s) {
            s.erase(0, s.find_first_not_of(' '));
            s.erase(s.find_last_not_of(' ') + 1);
          };
          trim(key);
          trim(val);
          auto& p = fm.provenance;
          if (key == "maximize") fm.maximize = val == "1";
          else if (key == "model") p.model_name = val;
          else if (key == "integration") p.integration = val;
          else if (key == "weighting") p.weighting = val;
          else if (key == "state_grid") p.state_grid = val;
          else if (key == "action_grid") p.action_grid = val;
          else if (key == "truncation") p.truncation = val;
          else if (key == "normalization_residual") p.normalization_residual = std::strtod(val.c_str(), nullptr);
          else if (key == "memory_bytes") p.memory_bytes = std::strtoull(val.c_str(), nullptr, 10);
          else if (key == "params") p.extra = val;
        }
        continue;
      }
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      return std::istringstream(line);
    }
    fail(ErrorKind::Io, "finite MDP stream ended early");
  };

  for (std::size_t i = 0; i < ns; ++i) {
    auto ls = next_data_line();
    for (std::size_t a = 0; a < na; ++a) fm.cost(i, a) = next_number(ls);
  }
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t a = 0; a < na; ++a) {
      auto ls = next_data_line();
      auto row = fm.row(i, a);
      for (std::size_t j = 0; j < ns; ++j) row[j] = next_number(ls);
    }
  return fm;
}

void save_finite_mdp(const std::string& path, const FiniteMdp& fm) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  write_finite_mdp(out, fm);
  if (!out) fail(ErrorKind::Io, "write to '" + path + "' failed");
}

FiniteMdp load_finite_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  return read_finite_mdp(in);
}

}  // namespace qmdp
