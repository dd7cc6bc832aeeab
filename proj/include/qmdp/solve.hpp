#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "qmdp/finite_mdp.hpp"

namespace qmdp {

using Policy = std::vector<std::size_t>;

struct SolveResult {
  std::vector<double> values;  // J_n* (discounted) or bias h (average)
  std::optional<double> gain;  // average criterion only
  double gain_lo = 0.0;
  double gain_hi = 0.0;
  Policy policy;
  std::size_t iterations = 0;
  double residual = 0.0;  // sup-norm Bellman residual, or span of T h - h
  double damping = 1.0;
  std::size_t ref_state = 0;
  std::vector<double> delta_history;  // successive sup-norm (VI) or span (RVI) deltas
};

/// Q(i, a) = C[i][a] + beta * sum_j P[i][a][j] v[j], minimised over a with
/// ties to the smallest action index.
Policy greedy_policy(const FiniteMdp& fm, std::span<const double> values, double discount);

/// Value iteration from J = 0. Stops once successive iterates differ by at
/// most tol (1 - beta) / (2 beta), so the returned J is within tol of J*.
SolveResult value_iteration(const FiniteMdp& fm, double tol, std::size_t max_iters = 1'000'000,
                            int jobs = 1);

/// Relative value iteration on the damped kernel damping * P + (1 - damping) I.
/// The gain is unaffected by damping; the returned bias is for the undamped model.
SolveResult relative_value_iteration(const FiniteMdp& fm, double tol, double damping = 0.5,
                                     std::size_t ref_state = 0, std::size_t max_iters = 100'000,
                                     int jobs = 1);

/// Solves (I - beta P_f) J = c_f.
std::vector<double> eval_policy_discounted(const FiniteMdp& fm, std::span<const std::size_t> policy);

/// Gain mu_f . c_f for the unique invariant distribution of P_f.
double eval_policy_average(const FiniteMdp& fm, std::span<const std::size_t> policy);

/// Invariant distribution of P_f; throws if the eigenvalue 1 is not simple.
std::vector<double> invariant_distribution(const FiniteMdp& fm, std::span<const std::size_t> policy);

}  // namespace qmdp
