#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qmdp/compactification.hpp"
#include "qmdp/model.hpp"
#include "qmdp/quantizer.hpp"
#include "qmdp/solve.hpp"

namespace qmdp {

/// Finite policy composed with the state quantizer: piecewise constant on
/// quantization cells, and constant (the pseudo-state's action) outside K_n.
class ExtendedPolicy {
 public:
  ExtendedPolicy(Policy base, Quantizer state_q, Quantizer action_q,
                 std::optional<Compactification> compact = std::nullopt);

  std::size_t finite_state(std::span<const double> z) const;
  const State& operator()(std::span<const double> z) const;

  const Policy& base() const noexcept { return base_; }
  const Quantizer& state_quantizer() const noexcept { return state_q_; }
  const Quantizer& action_points() const noexcept { return action_q_; }

 private:
  Policy base_;
  Quantizer state_q_;
  Quantizer action_q_;
  std::optional<Compactification> compact_;
};

ExtendedPolicy extend_policy(const SolveResult& result, const Quantizer& state_q,
                             const Quantizer& action_q,
                             std::optional<Compactification> compact = std::nullopt);

struct RolloutReport {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t episodes = 0;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  std::vector<double> per_stage;         // stage-cost means D_t
  std::vector<double> per_stage_stderr;
  std::size_t escaped_episodes = 0;      // left the safety box at least once
};

struct RolloutOptions {
  std::size_t episodes = 1000;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool keep_per_stage = false;
  /// Diagnostics only; trajectories are never clipped.
  std::optional<BoxSpace> safety_box;
};

/// Smallest T with beta^T * cost_bound / (1 - beta) <= tail_tol (at least 1).
std::size_t discounted_horizon(double beta, double cost_bound, double tail_tol);

/// Initial state: fixed point, or (when empty) a draw from the noise law.
using InitialState = std::optional<State>;

RolloutReport rollout_discounted(const ContinuousMdp& model, const ExtendedPolicy& policy,
                                 const InitialState& x0, double tail_tol,
                                 const RolloutOptions& opts);

RolloutReport rollout_average(const ContinuousMdp& model, const ExtendedPolicy& policy,
                              const InitialState& x0, std::size_t horizon,
                              const RolloutOptions& opts);

/// Stage-cost means D_t = E[c(z_t, a_t)], t = 0..horizon-1, with standard errors.
RolloutReport per_stage_distortion(const ContinuousMdp& model, const ExtendedPolicy& policy,
                                   const InitialState& x0, std::size_t horizon,
                                   const RolloutOptions& opts);

}  // namespace qmdp
