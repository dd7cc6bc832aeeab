/* C interface to the quantized-MDP library.
 *
 * Every function returns a qmdp_status; on failure the message is available
 * from qmdp_last_error() on the calling thread until the next failing call.
 * Handles are opaque and owned by the caller, who releases them with the
 * matching *_destroy function. Output paths accept "-" for standard output. */
#ifndef QMDP_H
#define QMDP_H

#include <stddef.h>
#include <stdint.h>

#if defined(QMDP_BUILDING_LIBRARY)
#define QMDP_API __attribute__((visibility("default")))
#else
#define QMDP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qmdp_status {
  QMDP_OK = 0,
  QMDP_ERR_INPUT = 1,
  QMDP_ERR_BUILD = 2,
  QMDP_ERR_NUMERIC = 3,
  QMDP_ERR_CONVERGENCE = 4,
  QMDP_ERR_PRECONDITION = 5,
  QMDP_ERR_IO = 6,
  QMDP_ERR_INTERNAL = 7
} qmdp_status;

typedef struct qmdp_experiment qmdp_experiment;
typedef struct qmdp_finite_mdp qmdp_finite_mdp;
typedef struct qmdp_solution qmdp_solution;

QMDP_API const char* qmdp_version(void);
QMDP_API const char* qmdp_last_error(void);
QMDP_API const char* qmdp_status_name(qmdp_status status);

/* ---- experiments ------------------------------------------------------ */

QMDP_API qmdp_status qmdp_experiment_from_file(const char* path, qmdp_experiment** out);
/* Presets: "fig1", "fig2", "slb". */
QMDP_API qmdp_status qmdp_experiment_from_preset(const char* name, qmdp_experiment** out);
QMDP_API qmdp_status qmdp_experiment_from_string(const char* ini_text, qmdp_experiment** out);
QMDP_API void qmdp_experiment_destroy(qmdp_experiment* exp);

/* The returned text stays valid until the next call on this thread. */
QMDP_API qmdp_status qmdp_preset_text(const char* name, const char** text);

/* Overrides "section.key" and re-validates the whole configuration. */
QMDP_API qmdp_status qmdp_experiment_set(qmdp_experiment* exp, const char* key, const char* value);
/* *value is NULL when the key is absent; valid until the next call on exp. */
QMDP_API qmdp_status qmdp_experiment_get(qmdp_experiment* exp, const char* key, const char** value);
/* Writes up to cap sweep steps; *count receives the total. */
QMDP_API qmdp_status qmdp_experiment_steps(const qmdp_experiment* exp, int* steps, size_t cap, size_t* count);

typedef struct qmdp_sweep_summary {
  size_t rows;
  size_t failed;
  int plot_empty; /* plot data requested but no successful rows */
} qmdp_sweep_summary;

/* Runs every sweep step and writes one CSV row per step. plot_path may be NULL. */
QMDP_API qmdp_status qmdp_experiment_run_sweep(const qmdp_experiment* exp, int jobs, const char* csv_path,
                                               const char* plot_path, int include_wall,
                                               qmdp_sweep_summary* summary);
/* Per-stage distortion sweep against the lower-bound floor. */
QMDP_API qmdp_status qmdp_experiment_run_order(const qmdp_experiment* exp, int jobs, const char* csv_path,
                                               qmdp_sweep_summary* summary);

typedef struct qmdp_rollout_report {
  double estimate;
  double std_error;
  size_t episodes;
  size_t horizon;
  size_t escaped_episodes;
  uint64_t seed;
  double value_at_x0; /* finite-model value at x0 (gain for the average criterion) */
} qmdp_rollout_report;

/* Builds and solves one step, then rolls out the extended policy. */
QMDP_API qmdp_status qmdp_experiment_evaluate(const qmdp_experiment* exp, int step, int jobs,
                                              qmdp_rollout_report* out);

/* ---- finite models ---------------------------------------------------- */

QMDP_API qmdp_status qmdp_fmdp_build(const qmdp_experiment* exp, int step, int jobs, qmdp_finite_mdp** out);
/* cost is [n_states][n_actions], trans is [n_states][n_actions][n_states]. */
QMDP_API qmdp_status qmdp_fmdp_create(size_t n_states, size_t n_actions, double beta, const double* cost,
                                      const double* trans, int maximize, qmdp_finite_mdp** out);
QMDP_API qmdp_status qmdp_fmdp_load(const char* path, qmdp_finite_mdp** out);
QMDP_API qmdp_status qmdp_fmdp_save(const qmdp_finite_mdp* fm, const char* path);
QMDP_API qmdp_status qmdp_fmdp_shape(const qmdp_finite_mdp* fm, size_t* n_states, size_t* n_actions, double* beta);
QMDP_API qmdp_status qmdp_fmdp_cost(const qmdp_finite_mdp* fm, double* out);
QMDP_API qmdp_status qmdp_fmdp_transitions(const qmdp_finite_mdp* fm, double* out);
/* *same is 1 when shape, costs and transitions agree bit for bit. */
QMDP_API qmdp_status qmdp_fmdp_identical(const qmdp_finite_mdp* a, const qmdp_finite_mdp* b, int* same);
QMDP_API void qmdp_fmdp_destroy(qmdp_finite_mdp* fm);

/* ---- solving ---------------------------------------------------------- */

typedef struct qmdp_solver_options {
  double tol;
  size_t max_iters; /* 0: solver default */
  double damping;   /* average criterion only */
  size_t ref_state; /* average criterion only */
  int jobs;
} qmdp_solver_options;

QMDP_API qmdp_solver_options qmdp_solver_options_default(void);

QMDP_API qmdp_status qmdp_solve_discounted(const qmdp_finite_mdp* fm, const qmdp_solver_options* opts,
                                           qmdp_solution** out);
QMDP_API qmdp_status qmdp_solve_average(const qmdp_finite_mdp* fm, const qmdp_solver_options* opts,
                                        qmdp_solution** out);

typedef struct qmdp_solution_info {
  size_t n_states;
  size_t iterations;
  double residual;
  int has_gain;
  double gain;
  double gain_lo;
  double gain_hi;
  double damping;
} qmdp_solution_info;

QMDP_API qmdp_status qmdp_solution_info_get(const qmdp_solution* sol, qmdp_solution_info* out);
QMDP_API qmdp_status qmdp_solution_values(const qmdp_solution* sol, double* out);
QMDP_API qmdp_status qmdp_solution_policy(const qmdp_solution* sol, size_t* out);
QMDP_API qmdp_status qmdp_solution_save(const qmdp_solution* sol, const char* path);
QMDP_API void qmdp_solution_destroy(qmdp_solution* sol);

QMDP_API qmdp_status qmdp_eval_policy_discounted(const qmdp_finite_mdp* fm, const size_t* policy, double* values);
QMDP_API qmdp_status qmdp_eval_policy_average(const qmdp_finite_mdp* fm, const size_t* policy, double* gain);

/* ---- bounds ----------------------------------------------------------- */

typedef double (*qmdp_modulus)(double r, void* ctx);

typedef struct qmdp_bound_inputs {
  double K1;
  double K2;
  double beta;
  double alpha_cov;
  int d;
  double c_sup;
  double R;
  double kappa;
  qmdp_modulus omega_c; /* optional */
  void* omega_c_ctx;
  qmdp_modulus omega_p; /* optional */
  void* omega_p_ctx;
} qmdp_bound_inputs;

QMDP_API qmdp_status qmdp_bound_discounted(const qmdp_bound_inputs* in, long n, double* out);
QMDP_API qmdp_status qmdp_bound_average_modulus(const qmdp_bound_inputs* in, long n, long t, double* out);
QMDP_API qmdp_status qmdp_bound_average_lipschitz(const qmdp_bound_inputs* in, long n, double* value,
                                                  double* t_prime, int* pre_asymptotic);
QMDP_API qmdp_status qmdp_slb_constant(int d, double h_g, double* out);
QMDP_API qmdp_status qmdp_slb_floor(int d, double h_g, long n, double* out);
QMDP_API qmdp_status qmdp_slb_floor_discounted(int d, double h_g, long n, double beta, double* out);
QMDP_API qmdp_status qmdp_grid_size_for_epsilon(const qmdp_bound_inputs* in, double eps, long* n);

/* CSV "n,upper_bound,slb_floor" for n = first, first + stride, ..., <= last.
 * When R, kappa, c_sup and K2 are all positive the average-cost columns
 * "average_bound,pre_asymptotic" are appended. */
QMDP_API qmdp_status qmdp_bounds_csv(const qmdp_bound_inputs* in, double h_g, long first, long last, long stride,
                                     const char* path);

#ifdef __cplusplus
}
#endif

#endif /* QMDP_H */
