#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qmdp/compactification.hpp"
#include "qmdp/model.hpp"
#include "qmdp/quantizer.hpp"

namespace qmdp {

struct Provenance {
  std::string model_name;
  std::uint64_t seed = 0;
  std::string integration;
  std::string weighting;
  std::string state_grid;
  std::string action_grid;
  std::string truncation;
  double normalization_residual = 0.0;  // max |row sum - 1| before normalization
  std::size_t memory_bytes = 0;
  std::string extra;  // free-form "key=value;..." model parameters
};

/// Dense finite MDP in minimization convention: cost C[i][a], kernel P[i][a][j].
class FiniteMdp {
 public:
  FiniteMdp() = default;
  FiniteMdp(std::size_t n_states, std::size_t n_actions, double beta);
  FiniteMdp(std::size_t n_states, std::size_t n_actions, double beta, std::vector<double> cost,
            std::vector<double> trans);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  double beta() const noexcept { return beta_; }

  double cost(std::size_t i, std::size_t a) const { return cost_[i * n_actions_ + a]; }
  double& cost(std::size_t i, std::size_t a) { return cost_[i * n_actions_ + a]; }
  double p(std::size_t i, std::size_t a, std::size_t j) const { return trans_[row_offset(i, a) + j]; }

  std::span<const double> row(std::size_t i, std::size_t a) const {
    return {trans_.data() + row_offset(i, a), n_states_};
  }
  std::span<double> row(std::size_t i, std::size_t a) { return {trans_.data() + row_offset(i, a), n_states_}; }

  const std::vector<double>& cost_matrix() const noexcept { return cost_; }
  const std::vector<double>& transition_tensor() const noexcept { return trans_; }
  std::vector<double>& transition_tensor() noexcept { return trans_; }

  /// Original objective is a maximization; cost holds the negated reward.
  bool maximize = false;
  Provenance provenance;

  /// Row-stochastic, entries in [0, 1], finite costs (tolerance on row sums).
  void check_invariants(double row_tol = 1e-9) const;

  bool identical(const FiniteMdp& other) const noexcept;

 private:
  std::size_t row_offset(std::size_t i, std::size_t a) const noexcept {
    return (i * n_actions_ + a) * n_states_;
  }

  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  double beta_ = 0.0;
  std::vector<double> cost_;
  std::vector<double> trans_;
};

struct IntegrationSpec {
  enum class Method { AnalyticCdf, GaussLegendre, MonteCarlo };
  Method method = Method::AnalyticCdf;
  std::size_t nodes = 8;         // Gauss-Legendre nodes per axis per cell
  std::size_t samples = 100000;  // Monte Carlo samples per (state, action)
  std::uint64_t seed = 0;

  static IntegrationSpec analytic() { return {}; }
  static IntegrationSpec gauss_legendre(std::size_t m) { return {Method::GaussLegendre, m, 0, 0}; }
  static IntegrationSpec monte_carlo(std::size_t n, std::uint64_t seed) {
    return {Method::MonteCarlo, 0, n, seed};
  }

  void validate() const;
  std::string describe() const;
};

IntegrationSpec::Method parse_integration_method(const std::string& s);

struct NormalizationReport {
  double max_residual = 0.0;
  std::size_t worst_state = 0;
  std::size_t worst_action = 0;
};

/// Divides every row of a [n_states][n_actions][n_states] tensor by its sum.
/// Throws a Build error naming (state, action) if a sum is outside [1-tol, 1+tol].
NormalizationReport normalize_rows(std::span<double> trans, std::size_t n_states,
                                   std::size_t n_actions, double tol);

/// Finite model for a compact state space; rows are the pushforward of the
/// kernel through the state quantizer, averaged over the cell weighting.
FiniteMdp build_finite_mdp(const ContinuousMdp& model, const Quantizer& state_q,
                           const Quantizer& action_q, const WeightingSpec& weighting,
                           const IntegrationSpec& ispec, int jobs = 1);

/// Finite model on a truncation K with the pseudo-state appended as the last state.
FiniteMdp build_finite_mdp(const ContinuousMdp& model, const Quantizer& state_q,
                           const Quantizer& action_q, const WeightingSpec& weighting,
                           const IntegrationSpec& ispec, const Compactification& compact,
                           int jobs = 1);

/// Truncated model for schedule step n; `state_q` must be built on K_n.
FiniteMdp build_truncated_mdp(const ContinuousMdp& model, const TruncationSchedule& schedule,
                              int step, const Quantizer& state_q, const Quantizer& action_q,
                              const WeightingSpec& weighting, const IntegrationSpec& ispec,
                              int jobs = 1);

/// Plain-text serialization: header "finite_mdp n_states n_actions beta seed",
/// '#' provenance lines, then the cost rows and the transition rows, all with
/// 17 significant digits.
void write_finite_mdp(std::ostream& out, const FiniteMdp& fm);
FiniteMdp read_finite_mdp(std::istream& in);
void save_finite_mdp(const std::string& path, const FiniteMdp& fm);
FiniteMdp load_finite_mdp(const std::string& path);

}  // namespace qmdp
