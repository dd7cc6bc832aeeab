#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qmdp/compactification.hpp"
#include "qmdp/evaluate.hpp"
#include "qmdp/finite_mdp.hpp"
#include "qmdp/model.hpp"
#include "qmdp/solve.hpp"

namespace qmdp {

enum class Criterion { Discounted, Average };

struct SweepSpec {
  enum class GridRule { Identity, RefinedTruncation };
  enum class ActionRule { Fixed, Multiple, RefinedTruncation };

  std::vector<int> steps;
  GridRule grid_rule = GridRule::Identity;
  ActionRule action_rule = ActionRule::Fixed;
  double action_multiplier = 5.0;  // Multiple: k = multiplier * n
  double k_slope = 5.0;            // RefinedTruncation: k_m = k_slope * m
  int k_divisor = 3;               //   with m = ceil(n / k_divisor)
};

struct SolverSpec {
  Criterion criterion = Criterion::Discounted;
  double tol = 1e-8;
  std::size_t max_iters = 0;  // 0: solver default
  double damping = 0.5;
  std::size_t ref_state = 0;
};

struct EvalSpec {
  InitialState x0 = State{0.0};  // empty: draw from the noise law
  bool rollout = false;
  std::size_t episodes = 1000;
  std::uint64_t seed = 1;
  double tail_tol = 1e-4;
  std::size_t horizon = 1000;
};

/// Typed view of an experiment file. `entries` keeps the flat "section.key"
/// map it was parsed from so overrides can be applied and re-validated.
struct ExperimentConfig {
  std::map<std::string, std::string> entries;

  std::string model_name;
  std::size_t grid_n = 10;
  std::size_t action_k = 10;
  std::optional<TruncationSchedule> truncation;
  WeightingSpec weighting;
  IntegrationSpec integration;
  SweepSpec sweep;
  SolverSpec solver;
  EvalSpec eval;
  std::string output_csv;
  int precision = 17;

  static ExperimentConfig from_entries(std::map<std::string, std::string> entries);
  /// Sets "section.key" and re-parses.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key, const std::string& fallback = "") const;
};

ExperimentConfig parse_config(std::string_view ini_text);
ExperimentConfig load_config(const std::string& path);

/// Built-in experiment files: "fig1", "fig2", "slb".
std::string preset_text(std::string_view name);
ExperimentConfig preset(std::string_view name);

ContinuousMdp make_model(const ExperimentConfig& cfg);

/// Grid sizes for one sweep step.
struct StepPlan {
  int step = 0;
  std::size_t grid_n = 0;
  std::size_t action_k = 0;
  std::optional<Compactification> compact;
};

StepPlan plan_step(const ExperimentConfig& cfg, const ContinuousMdp& model, int step);

struct StepModel {
  StepPlan plan;
  Quantizer state_q;
  Quantizer action_q;
  FiniteMdp fm;
};

StepModel build_step(const ExperimentConfig& cfg, const ContinuousMdp& model, int step, int jobs = 1);
SolveResult solve_step(const ExperimentConfig& cfg, const FiniteMdp& fm, int jobs = 1);
/// Finite state holding x0 (the pseudo-state when x0 lies outside K_n).
std::size_t x0_state(const StepModel& sm, std::span<const double> x0);

/// One Bellman step of the original model from x0 on the extended finite
/// value function: min_a c(x0, a) + beta E[J_n(cell of x')], in the
/// minimization convention. Unlike J_n(Q_n(x0)) it does not jump with the
/// grid offset of x0.
double lookahead_value(const ContinuousMdp& model, const StepModel& sm, std::span<const double> values,
                       std::span<const double> x0);

struct PipelineRow {
  int n = 0;
  std::size_t states = 0;
  std::size_t actions = 0;
  double value_at_x0 = 0.0;  // discounted value, or gain; in the model's own sign
  double lookahead_at_x0 = 0.0;
  bool has_lookahead = false;
  double residual = 0.0;
  double rollout_estimate = 0.0;
  double rollout_stderr = 0.0;
  bool has_rollout = false;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  std::string error;
};

std::vector<PipelineRow> run_pipeline(const ExperimentConfig& cfg, int jobs = 1);
void write_pipeline_csv(std::ostream& out, const std::vector<PipelineRow>& rows, int precision = 17,
                        bool include_wall = true);

struct OrderRow {
  int n = 0;
  double min_distortion = 0.0;
  double std_error = 0.0;
  std::size_t argmin_stage = 0;
  double slb_floor = 0.0;
  double wall_ms = 0.0;
  std::string error;
};

std::vector<OrderRow> run_order_optimality(const ExperimentConfig& cfg, int jobs = 1);
void write_order_csv(std::ostream& out, const std::vector<OrderRow>& rows, int precision = 17);

/// Writes "n value" lines (17 significant digits). Returns false when rows
/// is empty; the (empty) file is still written.
bool emit_plot_data(const std::vector<PipelineRow>& rows, const std::string& path);
std::vector<std::pair<double, double>> read_plot_data(const std::string& path);

/// Shortest decimal text with 17 significant digits.
std::string format_real(double v, int precision = 17);

}  // namespace qmdp
