#include "qmdp/qmdp.h"

#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "qmdp/bounds.hpp"
#include "qmdp/error.hpp"
#include "qmdp/experiment.hpp"

struct qmdp_experiment {
  qmdp::ExperimentConfig cfg;
  std::string scratch;
};

struct qmdp_finite_mdp {
  qmdp::FiniteMdp fm;
};

struct qmdp_solution {
  qmdp::SolveResult res;
  bool average = false;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_text;

qmdp_status status_of(qmdp::ErrorKind k) {
  switch (k) {
    case qmdp::ErrorKind::Input: return QMDP_ERR_INPUT;
    case qmdp::ErrorKind::Build: return QMDP_ERR_BUILD;
    case qmdp::ErrorKind::Numeric: return QMDP_ERR_NUMERIC;
    case qmdp::ErrorKind::Convergence: return QMDP_ERR_CONVERGENCE;
    case qmdp::ErrorKind::Precondition: return QMDP_ERR_PRECONDITION;
    case qmdp::ErrorKind::Io: return QMDP_ERR_IO;
  }
  return QMDP_ERR_INTERNAL;
}

template <class F>
qmdp_status guarded(F&& body) {
  try {
    body();
    return QMDP_OK;
  } catch (const qmdp::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return QMDP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return QMDP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return QMDP_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) qmdp::fail(qmdp::ErrorKind::Input, std::string(what) + " must not be NULL");
}

// Runs `write` against the file at `path`, or stdout for "-".
template <class W>
void with_output(const char* path, W&& write) {
  need(path, "output path");
  if (std::strcmp(path, "-") == 0) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) qmdp::fail(qmdp::ErrorKind::Io, std::string("cannot open '") + path + "' for writing");
  write(out);
  if (!out) qmdp::fail(qmdp::ErrorKind::Io, std::string("write to '") + path + "' failed");
}

qmdp::BoundInputs to_inputs(const qmdp_bound_inputs* in) {
  need(in, "bound inputs");
  qmdp::BoundInputs b;
  b.K1 = in->K1;
  b.K2 = in->K2;
  b.beta = in->beta;
  b.alpha_cov = in->alpha_cov;
  b.d = in->d;
  b.c_sup = in->c_sup;
  b.R = in->R;
  b.kappa = in->kappa;
  if (in->omega_c) b.omega_c = [f = in->omega_c, ctx = in->omega_c_ctx](double r) { return f(r, ctx); };
  if (in->omega_p) b.omega_p = [f = in->omega_p, ctx = in->omega_p_ctx](double r) { return f(r, ctx); };
  return b;
}

qmdp_status make_experiment(qmdp::ExperimentConfig cfg, qmdp_experiment** out) {
  *out = new qmdp_experiment{std::move(cfg), {}};
  return QMDP_OK;
}

qmdp_status solve(const qmdp_finite_mdp* fm, const qmdp_solver_options* opts, bool average, qmdp_solution** out) {
  return guarded([&] {
    need(fm, "finite MDP");
    need(out, "out");
    const qmdp_solver_options o = opts ? *opts : qmdp_solver_options_default();
    auto sol = std::make_unique<qmdp_solution>();
    sol->average = average;
    if (average)
      sol->res = qmdp::relative_value_iteration(fm->fm, o.tol, o.damping, o.ref_state,
                                                o.max_iters ? o.max_iters : 100'000, o.jobs);
    else
      sol->res = qmdp::value_iteration(fm->fm, o.tol, o.max_iters ? o.max_iters : 1'000'000, o.jobs);
    *out = sol.release();
  });
}

}  // namespace

extern "C" {

const char* qmdp_version(void) { return "0.1.0"; }

const char* qmdp_last_error(void) { return g_last_error.c_str(); }

const char* qmdp_status_name(qmdp_status status) {
  switch (status) {
    case QMDP_OK: return "ok";
    case QMDP_ERR_INPUT: return "input error";
    case QMDP_ERR_BUILD: return "build error";
    case QMDP_ERR_NUMERIC: return "numeric error";
    case QMDP_ERR_CONVERGENCE: return "convergence error";
    case QMDP_ERR_PRECONDITION: return "precondition error";
    case QMDP_ERR_IO: return "i/o error";
    case QMDP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// ---- experiments ------------------------------------------------------------

qmdp_status qmdp_experiment_from_file(const char* path, qmdp_experiment** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    make_experiment(qmdp::load_config(path), out);
  });
}

qmdp_status qmdp_experiment_from_preset(const char* name, qmdp_experiment** out) {
  return guarded([&] {
    need(name, "preset name");
    need(out, "out");
    make_experiment(qmdp::preset(name), out);
  });
}

qmdp_status qmdp_experiment_from_string(const char* ini_text, qmdp_experiment** out) {
  return guarded([&] {
    need(ini_text, "config text");
    need(out, "out");
    make_experiment(qmdp::parse_config(ini_text), out);
  });
}

void qmdp_experiment_destroy(qmdp_experiment* exp) { delete exp; }

qmdp_status qmdp_preset_text(const char* name, const char** text) {
  return guarded([&] {
    need(name, "preset name");
    need(text, "text");
    g_text = qmdp::preset_text(name);
    *text = g_text.c_str();
  });
}

qmdp_status qmdp_experiment_set(qmdp_experiment* exp, const char* key, const char* value) {
  return guarded([&] {
    need(exp, "experiment");
    need(key, "key");
    need(value, "value");
    exp->cfg.set(key, value);
  });
}

qmdp_status qmdp_experiment_get(qmdp_experiment* exp, const char* key, const char** value) {
  return guarded([&] {
    need(exp, "experiment");
    need(key, "key");
    need(value, "value");
    const auto it = exp->cfg.entries.find(key);
    if (it == exp->cfg.entries.end()) {
      *value = nullptr;
      return;
    }
    exp->scratch = it->second;
    *value = exp->scratch.c_str();
  });
}

qmdp_status qmdp_experiment_steps(const qmdp_experiment* exp, int* steps, size_t cap, size_t* count) {
  return guarded([&] {
    need(exp, "experiment");
    need(count, "count");
    const auto& s = exp->cfg.sweep.steps;
    *count = s.size();
    if (cap > 0) need(steps, "steps");
    for (size_t i = 0; i < s.size() && i < cap; ++i) steps[i] = s[i];
  });
}

qmdp_status qmdp_experiment_run_sweep(const qmdp_experiment* exp, int jobs, const char* csv_path,
                                      const char* plot_path, int include_wall, qmdp_sweep_summary* summary) {
  return guarded([&] {
    need(exp, "experiment");
    const auto rows = qmdp::run_pipeline(exp->cfg, jobs);
    with_output(csv_path, [&](std::ostream& os) {
      qmdp::write_pipeline_csv(os, rows, exp->cfg.precision, include_wall != 0);
    });
    qmdp_sweep_summary s{rows.size(), 0, 0};
    for (const auto& r : rows) s.failed += r.error.empty() ? 0 : 1;
    if (plot_path) s.plot_empty = qmdp::emit_plot_data(rows, plot_path) ? 0 : 1;
    if (summary) *summary = s;
  });
}

qmdp_status qmdp_experiment_run_order(const qmdp_experiment* exp, int jobs, const char* csv_path,
                                      qmdp_sweep_summary* summary) {
  return guarded([&] {
    need(exp, "experiment");
    const auto rows = qmdp::run_order_optimality(exp->cfg, jobs);
    with_output(csv_path, [&](std::ostream& os) { qmdp::write_order_csv(os, rows, exp->cfg.precision); });
    qmdp_sweep_summary s{rows.size(), 0, 0};
    for (const auto& r : rows) s.failed += r.error.empty() ? 0 : 1;
    if (summary) *summary = s;
  });
}

qmdp_status qmdp_experiment_evaluate(const qmdp_experiment* exp, int step, int jobs, qmdp_rollout_report* out) {
  return guarded([&] {
    need(exp, "experiment");
    need(out, "out");
    const auto& cfg = exp->cfg;
    const qmdp::ContinuousMdp model = qmdp::make_model(cfg);
    const qmdp::StepModel sm = qmdp::build_step(cfg, model, step, jobs);
    const qmdp::SolveResult res = qmdp::solve_step(cfg, sm.fm, jobs);
    const qmdp::ExtendedPolicy pol = qmdp::extend_policy(res, sm.state_q, sm.action_q, sm.plan.compact);
    qmdp::RolloutOptions opts;
    opts.episodes = cfg.eval.episodes;
    opts.seed = cfg.eval.seed;
    opts.jobs = jobs;
    const bool average = cfg.solver.criterion == qmdp::Criterion::Average;
    const qmdp::RolloutReport rep = average
                                        ? qmdp::rollout_average(model, pol, cfg.eval.x0, cfg.eval.horizon, opts)
                                        : qmdp::rollout_discounted(model, pol, cfg.eval.x0, cfg.eval.tail_tol, opts);
    const double sign = sm.fm.maximize ? -1.0 : 1.0;
    double value = 0.0;
    if (average)
      value = sign * *res.gain;
    else if (cfg.eval.x0)
      value = sign * res.values[qmdp::x0_state(sm, *cfg.eval.x0)];
    *out = qmdp_rollout_report{rep.estimate, rep.std_error, rep.episodes, rep.horizon, rep.escaped_episodes,
                               rep.seed, value};
  });
}

// ---- finite models ------------------------------------------------------------

qmdp_status qmdp_fmdp_build(const qmdp_experiment* exp, int step, int jobs, qmdp_finite_mdp** out) {
  return guarded([&] {
    need(exp, "experiment");
    need(out, "out");
    const qmdp::ContinuousMdp model = qmdp::make_model(exp->cfg);
    *out = new qmdp_finite_mdp{qmdp::build_step(exp->cfg, model, step, jobs).fm};
  });
}

qmdp_status qmdp_fmdp_create(size_t n_states, size_t n_actions, double beta, const double* cost, const double* trans,
                             int maximize, qmdp_finite_mdp** out) {
  return guarded([&] {
    need(cost, "cost");
    need(trans, "trans");
    need(out, "out");
    qmdp::require(n_states > 0 && n_actions > 0, "finite MDP needs at least one state and one action");
    std::vector<double> c(cost, cost + n_states * n_actions);
    std::vector<double> p(trans, trans + n_states * n_actions * n_states);
    qmdp::FiniteMdp fm(n_states, n_actions, beta, std::move(c), std::move(p));
    fm.maximize = maximize != 0;
    fm.check_invariants(1e-9);
    *out = new qmdp_finite_mdp{std::move(fm)};
  });
}

qmdp_status qmdp_fmdp_load(const char* path, qmdp_finite_mdp** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new qmdp_finite_mdp{qmdp::load_finite_mdp(path)};
  });
}

qmdp_status qmdp_fmdp_save(const qmdp_finite_mdp* fm, const char* path) {
  return guarded([&] {
    need(fm, "finite MDP");
    with_output(path, [&](std::ostream& os) { qmdp::write_finite_mdp(os, fm->fm); });
  });
}

qmdp_status qmdp_fmdp_shape(const qmdp_finite_mdp* fm, size_t* n_states, size_t* n_actions, double* beta) {
  return guarded([&] {
    need(fm, "finite MDP");
    if (n_states) *n_states = fm->fm.n_states();
    if (n_actions) *n_actions = fm->fm.n_actions();
    if (beta) *beta = fm->fm.beta();
  });
}

qmdp_status qmdp_fmdp_cost(const qmdp_finite_mdp* fm, double* out) {
  return guarded([&] {
    need(fm, "finite MDP");
    need(out, "out");
    const auto& c = fm->fm.cost_matrix();
    std::copy(c.begin(), c.end(), out);
  });
}

qmdp_status qmdp_fmdp_transitions(const qmdp_finite_mdp* fm, double* out) {
  return guarded([&] {
    need(fm, "finite MDP");
    need(out, "out");
    const auto& p = fm->fm.transition_tensor();
    std::copy(p.begin(), p.end(), out);
  });
}

qmdp_status qmdp_fmdp_identical(const qmdp_finite_mdp* a, const qmdp_finite_mdp* b, int* same) {
  return guarded([&] {
    need(a, "first finite MDP");
    need(b, "second finite MDP");
    need(same, "same");
    *same = a->fm.identical(b->fm) ? 1 : 0;
  });
}

void qmdp_fmdp_destroy(qmdp_finite_mdp* fm) { delete fm; }

// ---- solving --------------------------------------------------------------------

qmdp_solver_options qmdp_solver_options_default(void) { return qmdp_solver_options{1e-8, 0, 0.5, 0, 1}; }

qmdp_status qmdp_solve_discounted(const qmdp_finite_mdp* fm, const qmdp_solver_options* opts, qmdp_solution** out) {
  return solve(fm, opts, false, out);
}

qmdp_status qmdp_solve_average(const qmdp_finite_mdp* fm, const qmdp_solver_options* opts, qmdp_solution** out) {
  return solve(fm, opts, true, out);
}

qmdp_status qmdp_solution_info_get(const qmdp_solution* sol, qmdp_solution_info* out) {
  return guarded([&] {
    need(sol, "solution");
    need(out, "out");
    const auto& r = sol->res;
    *out = qmdp_solution_info{r.values.size(), r.iterations, r.residual, r.gain ? 1 : 0,
                              r.gain.value_or(0.0), r.gain_lo, r.gain_hi, r.damping};
  });
}

qmdp_status qmdp_solution_values(const qmdp_solution* sol, double* out) {
  return guarded([&] {
    need(sol, "solution");
    need(out, "out");
    std::copy(sol->res.values.begin(), sol->res.values.end(), out);
  });
}

qmdp_status qmdp_solution_policy(const qmdp_solution* sol, size_t* out) {
  return guarded([&] {
    need(sol, "solution");
    need(out, "out");
    std::copy(sol->res.policy.begin(), sol->res.policy.end(), out);
  });
}

qmdp_status qmdp_solution_save(const qmdp_solution* sol, const char* path) {
  return guarded([&] {
    need(sol, "solution");
    const auto& r = sol->res;
    with_output(path, [&](std::ostream& os) {
      os << "# criterion = " << (sol->average ? "average" : "discounted") << '\n';
      os << "# iterations = " << r.iterations << '\n';
      os << "# residual = " << qmdp::format_real(r.residual) << '\n';
      if (r.gain) {
        os << "# gain = " << qmdp::format_real(*r.gain) << '\n';
        os << "# gain_bracket = " << qmdp::format_real(r.gain_lo) << ' ' << qmdp::format_real(r.gain_hi) << '\n';
        os << "# damping = " << qmdp::format_real(r.damping) << '\n';
        os << "# ref_state = " << r.ref_state << '\n';
      }
      os << "state,value,action\n";
      for (size_t i = 0; i < r.values.size(); ++i)
        os << i << ',' << qmdp::format_real(r.values[i]) << ',' << r.policy[i] << '\n';
    });
  });
}

void qmdp_solution_destroy(qmdp_solution* sol) { delete sol; }

qmdp_status qmdp_eval_policy_discounted(const qmdp_finite_mdp* fm, const size_t* policy, double* values) {
  return guarded([&] {
    need(fm, "finite MDP");
    need(policy, "policy");
    need(values, "values");
    const auto v = qmdp::eval_policy_discounted(fm->fm, {policy, fm->fm.n_states()});
    std::copy(v.begin(), v.end(), values);
  });
}

qmdp_status qmdp_eval_policy_average(const qmdp_finite_mdp* fm, const size_t* policy, double* gain) {
  return guarded([&] {
    need(fm, "finite MDP");
    need(policy, "policy");
    need(gain, "gain");
    *gain = qmdp::eval_policy_average(fm->fm, {policy, fm->fm.n_states()});
  });
}

// ---- bounds ---------------------------------------------------------------------

qmdp_status qmdp_bound_discounted(const qmdp_bound_inputs* in, long n, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = qmdp::discounted_rate_bound(to_inputs(in), n);
  });
}

qmdp_status qmdp_bound_average_modulus(const qmdp_bound_inputs* in, long n, long t, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = qmdp::average_rate_bound_modulus(to_inputs(in), n, t);
  });
}

qmdp_status qmdp_bound_average_lipschitz(const qmdp_bound_inputs* in, long n, double* value, double* t_prime,
                                         int* pre_asymptotic) {
  return guarded([&] {
    need(value, "value");
    const qmdp::AverageBound b = qmdp::average_rate_bound_lipschitz(to_inputs(in), n);
    *value = b.value;
    if (t_prime) *t_prime = b.t_prime;
    if (pre_asymptotic) *pre_asymptotic = b.pre_asymptotic ? 1 : 0;
  });
}

qmdp_status qmdp_slb_constant(int d, double h_g, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = qmdp::slb_constant(d, h_g);
  });
}

qmdp_status qmdp_slb_floor(int d, double h_g, long n, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = qmdp::slb_floor(d, h_g, n);
  });
}

qmdp_status qmdp_slb_floor_discounted(int d, double h_g, long n, double beta, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = qmdp::slb_floor_discounted(d, h_g, n, beta);
  });
}

qmdp_status qmdp_grid_size_for_epsilon(const qmdp_bound_inputs* in, double eps, long* n) {
  return guarded([&] {
    need(n, "n");
    *n = qmdp::grid_size_for_epsilon(to_inputs(in), eps);
  });
}

qmdp_status qmdp_bounds_csv(const qmdp_bound_inputs* in, double h_g, long first, long last, long stride,
                            const char* path) {
  return guarded([&] {
    const qmdp::BoundInputs b = to_inputs(in);
    qmdp::require(first >= 1 && last >= first && stride >= 1, "n range must satisfy 1 <= first <= last, stride >= 1");
    const bool average = b.R > 0.0 && b.kappa > 0.0 && b.c_sup > 0.0 && b.K2 > 0.0;
    // Evaluate everything before writing so a precondition failure leaves no partial file.
    std::ostringstream os;
    os << "n,upper_bound,slb_floor" << (average ? ",average_bound,pre_asymptotic" : "") << '\n';
    for (long n = first; n <= last; n += stride) {
      os << n << ',' << qmdp::format_real(qmdp::discounted_rate_bound(b, n)) << ','
         << qmdp::format_real(qmdp::slb_floor(b.d, h_g, n));
      if (average) {
        const qmdp::AverageBound ab = qmdp::average_rate_bound_lipschitz(b, n);
        os << ',' << qmdp::format_real(ab.value) << ',' << (ab.pre_asymptotic ? 1 : 0);
      }
      os << '\n';
    }
    with_output(path, [&](std::ostream& out) { out << os.str(); });
  });
}

}  // extern "C"
