#include "qmdp/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "qmdp/error.hpp"

namespace qmdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double interval_mass(const NoiseSpec& noise, double lo_shifted, double hi_shifted) {
  return std::clamp(noise.cdf(hi_shifted) - noise.cdf(lo_shifted), 0.0, 1.0);
}

void check_point(const BoxSpace& space, std::span<const double> z, const char* what) {
  if (z.size() != space.dim()) fail(ErrorKind::Input, std::string(what) + " has the wrong dimension");
  for (double v : z)
    if (!std::isfinite(v)) fail(ErrorKind::Input, std::string(what) + " is not finite");
  if (!space.unbounded && !space.contains(z, 1e-12))
    fail(ErrorKind::Input, std::string(what) + " lies outside " + space.describe());
}

}  // namespace

// --- noise ------------------------------------------------------------------

NoiseSpec NoiseSpec::gaussian(double mean, double sigma) {
  require(std::isfinite(mean), "gaussian noise mean must be finite");
  require(sigma > 0.0 && std::isfinite(sigma),
          "gaussian noise needs sigma > 0 (use uniform width 0 for zero noise)");
  NoiseSpec n;
  n.family_ = Family::Gaussian;
  n.mean_ = mean;
  n.sigma_ = sigma;
  return n;
}

NoiseSpec NoiseSpec::uniform(double width) {
  require(width >= 0.0 && std::isfinite(width), "uniform noise needs a finite width >= 0");
  NoiseSpec n;
  n.family_ = Family::Uniform;
  n.width_ = width;
  return n;
}

double NoiseSpec::cdf(double t) const noexcept {
  if (std::isnan(t)) return 0.0;
  if (family_ == Family::Gaussian)
    return 0.5 * std::erfc(-(t - mean_) / (sigma_ * std::numbers::sqrt2));
  if (t < 0.0) return 0.0;
  if (t >= width_) return 1.0;
  return t / width_;
}

double NoiseSpec::sample(Rng& rng) const {
  if (family_ == Family::Gaussian) return std::normal_distribution<double>(mean_, sigma_)(rng);
  return width_ * uniform01(rng);
}

double NoiseSpec::entropy_bits() const noexcept {
  if (family_ == Family::Gaussian)
    return 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e * sigma_ * sigma_);
  return width_ > 0.0 ? std::log2(width_) : -kInf;
}

std::string NoiseSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (family_ == Family::Gaussian)
    os << "gaussian(" << mean_ << "," << sigma_ << ")";
  else
    os << "uniform(0," << width_ << ")";
  return os.str();
}

// --- model ------------------------------------------------------------------

double RickerKernel::scale(double x, double a) const noexcept {
  const double m = std::min(a, x);
  return theta1 * m * std::exp(-theta2 * m);
}

void ContinuousMdp::validate() const {
  require(beta > 0.0 && beta < 1.0, "discount beta must lie in (0, 1)");
  require(static_cast<bool>(cost), "model '" + name + "' has no cost function");
  require(state_space.dim() >= 1 && action_space.dim() >= 1, "model spaces must have dim >= 1");
  if (const auto* ak = std::get_if<AdditiveKernel>(&kernel))
    require(static_cast<bool>(ak->dynamics), "additive kernel has no dynamics");
  if (std::holds_alternative<RickerKernel>(kernel))
    require(state_space.dim() == 1 && action_space.dim() == 1, "ricker model is one-dimensional");
}

const NoiseSpec* ContinuousMdp::noise() const noexcept {
  if (const auto* ak = std::get_if<AdditiveKernel>(&kernel)) return &ak->noise;
  if (const auto* rk = std::get_if<RickerKernel>(&kernel)) return &rk->noise;
  return nullptr;
}

double eval_cost(const ContinuousMdp& model, std::span<const double> x, std::span<const double> a) {
  check_point(model.state_space, x, "state");
  check_point(model.action_space, a, "action");
  const double c = model.cost(x, a);
  if (!std::isfinite(c)) fail(ErrorKind::Numeric, "cost evaluated to a non-finite value");
  return c;
}

double signed_cost(const ContinuousMdp& model, std::span<const double> x, std::span<const double> a) {
  const double c = eval_cost(model, x, a);
  return model.sense == Sense::Maximize ? -c : c;
}

State sample_next(const ContinuousMdp& model, std::span<const double> x, std::span<const double> a,
                  Rng& rng) {
  return std::visit(
      [&](const auto& k) -> State {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, AdditiveKernel>) {
          State next = k.dynamics(x, a);
          for (double& v : next) v += k.noise.sample(rng);
          return next;
        } else if constexpr (std::is_same_v<K, RickerKernel>) {
          return State{k.scale(x[0], a[0]) * std::exp(k.noise.sample(rng))};
        } else {
          const auto row = k.row(k.state_atoms.quantize(x), k.action_atoms.quantize(a));
          const double u = uniform01(rng);
          double acc = 0.0;
          std::size_t last = 0;
          for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] <= 0.0) continue;
            last = j;
            acc += row[j];
            if (u < acc) return k.state_atoms.point(j);
          }
          return k.state_atoms.point(last);
        }
      },
      model.kernel);
}

double cell_probability(const ContinuousMdp& model, std::span<const double> x,
                        std::span<const double> a, const BoxSpace& cell) {
  require(cell.dim() == model.state_space.dim(), "cell dimension does not match the state space");
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, AdditiveKernel>) {
          const State mean = k.dynamics(x, a);
          double p = 1.0;
          for (std::size_t j = 0; j < cell.dim(); ++j)
            p *= interval_mass(k.noise, cell.lo[j] - mean[j], cell.hi[j] - mean[j]);
          return p;
        } else if constexpr (std::is_same_v<K, RickerKernel>) {
          // y e^v in (lo, hi]  <=>  v in (log(lo / y), log(hi / y)].
          const double y = k.scale(x[0], a[0]);
          auto log_ratio = [y](double b) { return b <= 0.0 ? -kInf : std::log(b / y); };
          return interval_mass(k.noise, log_ratio(cell.lo[0]), log_ratio(cell.hi[0]));
        } else {
          const auto row = k.row(k.state_atoms.quantize(x), k.action_atoms.quantize(a));
          double p = 0.0;
          for (std::size_t j = 0; j < row.size(); ++j) {
            const auto& atom = k.state_atoms.point(j);
            bool inside = true;
            for (std::size_t d = 0; d < atom.size(); ++d)
              inside = inside && atom[d] > cell.lo[d] && atom[d] <= cell.hi[d];
            if (inside) p += row[j];
          }
          return std::clamp(p, 0.0, 1.0);
        }
      },
      model.kernel);
}

McEstimate cell_probability_mc(const ContinuousMdp& model, std::span<const double> x,
                               std::span<const double> a, const BoxSpace& cell,
                               std::size_t samples, std::uint64_t seed) {
  require(samples > 0, "monte carlo estimate needs at least one sample");
  Rng rng = make_stream(seed, 0);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const State next = sample_next(model, x, a, rng);
    bool inside = true;
    for (std::size_t d = 0; d < next.size(); ++d)
      inside = inside && next[d] > cell.lo[d] && next[d] <= cell.hi[d];
    hits += inside ? 1 : 0;
  }
  const double n = static_cast<double>(samples);
  const double p = static_cast<double>(hits) / n;
  return {p, std::sqrt(p * (1.0 - p) / n), samples};
}

// --- built-in models --------------------------------------------------------

LinearDynamics parse_linear_dynamics(std::string_view expr) {
  std::string s;
  for (char ch : expr)
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  require(!s.empty(), "empty dynamics expression");

  // Split into signed terms; a sign right after an exponent marker belongs to the number.
  std::vector<std::string> terms;
  std::string cur;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char ch = s[i];
    const bool exponent_sign = (ch == '+' || ch == '-') && i > 0 && (s[i - 1] == 'e' || s[i - 1] == 'E') &&
                               i > 1 && std::isdigit(static_cast<unsigned char>(s[i - 2]));
    if ((ch == '+' || ch == '-') && !exponent_sign && !cur.empty() && cur != "+" && cur != "-") {
      terms.push_back(cur);
      cur.clear();
    }
    cur.push_back(ch);
  }
  terms.push_back(cur);

  LinearDynamics out{0.0, 0.0, 0.0};
  for (std::string t : terms) {
    double sign = 1.0;
    if (!t.empty() && (t[0] == '+' || t[0] == '-')) {
      sign = t[0] == '-' ? -1.0 : 1.0;
      t.erase(0, 1);
    }
    require(!t.empty(), "malformed dynamics expression '" + std::string(expr) + "'");
    char var = 0;
    if (t.back() == 'x' || t.back() == 'a') {
      var = t.back();
      t.pop_back();
      if (!t.empty() && t.back() == '*') t.pop_back();
    }
    double coef = 1.0;
    if (!t.empty()) {
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), coef);
      require(ec == std::errc() && ptr == t.data() + t.size(),
              "malformed dynamics term in '" + std::string(expr) + "'");
    } else {
      require(var != 0, "malformed dynamics expression '" + std::string(expr) + "'");
    }
    coef *= sign;
    if (var == 'x') out.state_coef += coef;
    else if (var == 'a') out.action_coef += coef;
    else out.offset += coef;
  }
  return out;
}

ContinuousMdp make_additive_noise(const AdditiveNoiseParams& p) {
  require(p.dim >= 1, "additive model needs dim >= 1");
  require(p.action_halfwidth > 0.0 || (p.action_lo && p.action_hi), "action half-width must be positive");
  const std::size_t d = p.dim;
  const LinearDynamics lin = parse_linear_dynamics(p.dynamics);

  ContinuousMdp m;
  m.name = "additive_noise";
  m.beta = p.beta;
  m.sense = Sense::Minimize;
  const double alo = p.action_lo.value_or(-p.action_halfwidth);
  const double ahi = p.action_hi.value_or(p.action_halfwidth);
  m.action_space = BoxSpace(std::vector<double>(d, alo), std::vector<double>(d, ahi));
  if (p.bounded)
    m.state_space = BoxSpace(std::vector<double>(d, p.state_lo), std::vector<double>(d, p.state_hi));
  else
    m.state_space = BoxSpace(std::vector<double>(d, -p.l_max), std::vector<double>(d, p.l_max), true);

  const NoiseSpec noise = p.noise_family == NoiseSpec::Family::Gaussian
                              ? NoiseSpec::gaussian(p.noise_mean, p.sigma)
                              : NoiseSpec::uniform(p.lambda);
  m.kernel = AdditiveKernel{[lin](std::span<const double> x, std::span<const double> a) {
                              State f(x.size());
                              for (std::size_t j = 0; j < x.size(); ++j)
                                f[j] = lin.state_coef * x[j] +
                                       lin.action_coef * a[a.size() == 1 ? 0 : j] + lin.offset;
                              return f;
                            },
                            noise};

  const bool quadratic = p.cost == AdditiveNoiseParams::CostKind::Quadratic;
  m.cost = [quadratic](std::span<const double> x, std::span<const double> a) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = x[j] - a[a.size() == 1 ? 0 : j];
      s += diff * diff;
    }
    return quadratic ? s : std::sqrt(s);
  };

  const double k = p.weight_k;
  m.assumptions.weight_w = [k](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return k + s;
  };
  double reach;
  if (p.bounded) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double span = std::max(std::abs(p.state_hi - alo), std::abs(ahi - p.state_lo));
      r2 += span * span;
    }
    reach = std::sqrt(r2);
  } else {
    reach = 2.0 * p.l_max + std::max(std::abs(alo), std::abs(ahi));
  }
  m.assumptions.cost_sup_norm = p.cost_bound.value_or(quadratic ? reach * reach : reach);

  m.params = {{"beta", p.beta},
              {"sigma", p.sigma},
              {"lambda", p.lambda},
              {"action_lo", alo},
              {"action_hi", ahi},
              {"weight_k", p.weight_k},
              {"state_coef", lin.state_coef},
              {"action_coef", lin.action_coef},
              {"offset", lin.offset},
              {"dim", static_cast<double>(d)}};
  m.validate();
  return m;
}

double ricker_utility(double z) noexcept { return 3.0 * (std::cbrt(z + 0.5) - std::cbrt(0.5)); }

ContinuousMdp make_ricker(const RickerParams& p) {
  require(p.theta1 > 0.0 && p.theta2 > 0.0, "ricker needs theta1, theta2 > 0");
  require(0.0 < p.kappa_min && p.kappa_min < p.kappa_max, "ricker needs 0 < kappa_min < kappa_max");
  require(p.lambda >= 0.0, "ricker noise width must be >= 0");
  // theta1 y exp(-theta2 y + v) must stay in [kappa_min, kappa_max] for all y, v.
  auto g = [&](double y) { return p.theta1 * y * std::exp(-p.theta2 * y); };
  const double g_min = std::min(g(p.kappa_min), g(p.kappa_max));
  const double g_max = g(std::clamp(1.0 / p.theta2, p.kappa_min, p.kappa_max));
  require(g_min >= p.kappa_min && g_max * std::exp(p.lambda) <= p.kappa_max,
          "ricker parameters do not keep the population inside [kappa_min, kappa_max]");

  ContinuousMdp m;
  m.name = "ricker";
  m.beta = p.beta;
  m.sense = Sense::Maximize;
  m.state_space = BoxSpace::interval(p.kappa_min, p.kappa_max);
  m.action_space = BoxSpace::interval(p.kappa_min, p.kappa_max);
  m.kernel = RickerKernel{p.theta1, p.theta2, NoiseSpec::uniform(p.lambda)};
  m.cost = [](std::span<const double> x, std::span<const double> a) {
    return x[0] >= a[0] ? ricker_utility(x[0] - a[0]) : 0.0;
  };
  m.assumptions.cost_sup_norm = ricker_utility(p.kappa_max);
  m.params = {{"theta1", p.theta1}, {"theta2", p.theta2}, {"kappa_min", p.kappa_min},
              {"kappa_max", p.kappa_max}, {"lambda", p.lambda}, {"beta", p.beta}};
  m.validate();
  return m;
}

ContinuousMdp make_atomic_embedding(std::size_t n_states, std::size_t n_actions,
                                    std::vector<double> cost, std::vector<double> trans, double beta,
                                    Sense sense) {
  require(n_states > 0 && n_actions > 0, "embedding needs at least one state and action");
  require(cost.size() == n_states * n_actions, "embedding cost table has the wrong size");
  require(trans.size() == n_states * n_actions * n_states, "embedding kernel has the wrong size");
  for (std::size_t r = 0; r < n_states * n_actions; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < n_states; ++j) {
      const double v = trans[r * n_states + j];
      require(v >= 0.0 && v <= 1.0, "embedding kernel entries must lie in [0, 1]");
      s += v;
    }
    require(std::abs(s - 1.0) <= 1e-9, "embedding kernel rows must sum to 1");
  }

  ContinuousMdp m;
  m.name = "atomic_embedding";
  m.beta = beta;
  m.sense = sense;
  m.state_space = BoxSpace::interval(0.0, static_cast<double>(n_states));
  m.action_space = BoxSpace::interval(0.0, static_cast<double>(n_actions));
  AtomicKernel k{build_uniform_grid(m.state_space, n_states), build_action_grid(m.action_space, n_actions),
                 std::move(trans)};
  double sup = 0.0;
  for (double c : cost) sup = std::max(sup, std::abs(c));
  m.cost = [table = std::move(cost), sq = k.state_atoms, aq = k.action_atoms, n_actions](
               std::span<const double> x, std::span<const double> a) {
    return table[sq.quantize(x) * n_actions + aq.quantize(a)];
  };
  m.kernel = std::move(k);
  m.assumptions.cost_sup_norm = sup;
  m.params = {{"n_states", static_cast<double>(n_states)}, {"n_actions", static_cast<double>(n_actions)},
              {"beta", beta}};
  m.validate();
  return m;
}

}  // namespace qmdp
