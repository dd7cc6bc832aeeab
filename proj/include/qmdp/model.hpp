#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qmdp/quantizer.hpp"
#include "qmdp/random.hpp"
#include "qmdp/space.hpp"

namespace qmdp {

/// Scalar noise law, applied independently per coordinate.
class NoiseSpec {
 public:
  enum class Family { Gaussian, Uniform };

  static NoiseSpec gaussian(double mean, double sigma);
  /// Uniform on [0, width]; width 0 is the deterministic (zero-noise) case.
  static NoiseSpec uniform(double width);

  Family family() const noexcept { return family_; }
  double mean() const noexcept { return mean_; }
  double sigma() const noexcept { return sigma_; }
  double width() const noexcept { return width_; }

  /// P(v <= t), right-continuous.
  double cdf(double t) const noexcept;
  double sample(Rng& rng) const;
  /// Differential entropy in bits (-inf for the zero-width uniform).
  double entropy_bits() const noexcept;
  std::string describe() const;

 private:
  Family family_ = Family::Uniform;
  double mean_ = 0.0;
  double sigma_ = 0.0;
  double width_ = 0.0;
};

enum class Sense { Minimize, Maximize };

/// Constants the bound calculators and rollout truncation rely on. They are
/// declared by the model author, never derived.
struct AssumptionParams {
  std::function<double(std::span<const double>)> weight_w;  // defaults to 1
  std::optional<double> growth_M;
  std::optional<double> growth_alpha;
  double cost_sup_norm = 0.0;  // bound on |c| along trajectories
  std::optional<double> lip_K1;
  std::optional<double> lip_K2;
  std::optional<double> ergodic_R;
  std::optional<double> ergodic_kappa;

  double weight(std::span<const double> x) const { return weight_w ? weight_w(x) : 1.0; }
};

using VectorMap = std::function<State(std::span<const double> x, std::span<const double> a)>;
using CostFn = std::function<double(std::span<const double> x, std::span<const double> a)>;

/// next = F(x, a) + v, v iid per coordinate.
struct AdditiveKernel {
  VectorMap dynamics;
  NoiseSpec noise;
};

/// next = theta1 * m * exp(-theta2 * m + v), m = min(a, x).
struct RickerKernel {
  double theta1 = 1.1;
  double theta2 = 0.1;
  NoiseSpec noise;

  /// Deterministic part theta1 * m * exp(-theta2 * m).
  double scale(double x, double a) const noexcept;
};

/// Finite chain placed on atoms: state x is identified with its nearest atom,
/// action a with its nearest action point, and the next state is an atom.
struct AtomicKernel {
  Quantizer state_atoms;
  Quantizer action_atoms;
  std::vector<double> trans;  // [i][a][j], row-major

  std::span<const double> row(std::size_t i, std::size_t a) const {
    const std::size_t ns = state_atoms.size();
    return {trans.data() + (i * action_atoms.size() + a) * ns, ns};
  }
};

using Kernel = std::variant<AdditiveKernel, RickerKernel, AtomicKernel>;

/// Continuous-state, continuous-action MDP. Immutable after construction.
struct ContinuousMdp {
  std::string name;
  BoxSpace state_space;
  BoxSpace action_space;
  Kernel kernel;
  CostFn cost;
  double beta = 0.9;
  Sense sense = Sense::Minimize;
  AssumptionParams assumptions;
  std::map<std::string, double> params;  // recorded in build provenance

  void validate() const;
  const NoiseSpec* noise() const noexcept;
};

// --- operations -------------------------------------------------------------

double eval_cost(const ContinuousMdp& model, std::span<const double> x, std::span<const double> a);

/// Cost in minimization convention (reward negated for maximization models).
double signed_cost(const ContinuousMdp& model, std::span<const double> x, std::span<const double> a);

State sample_next(const ContinuousMdp& model, std::span<const double> x, std::span<const double> a,
                  Rng& rng);

/// p(cell | x, a) for a box cell (bounds may be infinite), via noise CDFs.
double cell_probability(const ContinuousMdp& model, std::span<const double> x,
                        std::span<const double> a, const BoxSpace& cell);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Sampling estimate of p(cell | x, a) for kernels without a CDF path.
McEstimate cell_probability_mc(const ContinuousMdp& model, std::span<const double> x,
                               std::span<const double> a, const BoxSpace& cell,
                               std::size_t samples, std::uint64_t seed);

// --- built-in models --------------------------------------------------------

/// F(x, a) = state_coef * x + action_coef * a + offset, coordinatewise.
struct LinearDynamics {
  double state_coef = 1.0;
  double action_coef = 1.0;
  double offset = 0.0;
};

/// Parses forms such as "x+a", "0.25*x + 0.25*a", "x - 0.5*a + 1".
LinearDynamics parse_linear_dynamics(std::string_view expr);

struct AdditiveNoiseParams {
  enum class CostKind { Quadratic, Absolute };

  std::string dynamics = "x+a";
  double beta = 0.3;
  NoiseSpec::Family noise_family = NoiseSpec::Family::Gaussian;
  double sigma = 0.1;
  double noise_mean = 0.0;
  double lambda = 1.0;  // uniform width
  double action_halfwidth = 0.5;
  std::optional<double> action_lo;
  std::optional<double> action_hi;
  CostKind cost = CostKind::Quadratic;
  double weight_k = 1.0;
  std::size_t dim = 1;
  // Bounded variant (compact state space); otherwise the state space is R^d.
  bool bounded = false;
  double state_lo = -1.0;
  double state_hi = 1.0;
  // Declared |c| bound for rollout tail truncation; defaults to (2 l_max + L)^2.
  std::optional<double> cost_bound;
  double l_max = 4.25;
};

ContinuousMdp make_additive_noise(const AdditiveNoiseParams& p = {});

struct RickerParams {
  double theta1 = 1.1;
  double theta2 = 0.1;
  double kappa_min = 0.005;
  double kappa_max = 7.0;
  double lambda = 0.5;
  double beta = 0.9;  // only used if the model is solved under discounting
};

/// Shifted isoelastic utility 3((z + 0.5)^(1/3) - 0.5^(1/3)).
double ricker_utility(double z) noexcept;

ContinuousMdp make_ricker(const RickerParams& p = {});

/// Embeds a finite MDP as a continuous model on [0, n_states] x [0, n_actions]
/// with atoms at the cell-centred grid points.
ContinuousMdp make_atomic_embedding(std::size_t n_states, std::size_t n_actions,
                                    std::vector<double> cost, std::vector<double> trans,
                                    double beta, Sense sense = Sense::Minimize);

}  // namespace qmdp
