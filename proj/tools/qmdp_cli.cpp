// Command-line driver over the C API.
#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "qmdp/qmdp.h"

namespace {

struct Failure {
  qmdp_status status;
};

void check(qmdp_status s) {
  if (s != QMDP_OK) throw Failure{s};
}

struct Source {
  std::string config;
  std::string preset;
  std::vector<std::string> overrides;
  std::optional<unsigned long long> seed;
  int jobs = 1;
};

void add_source(CLI::App* app, Source& src, bool required = true) {
  auto* cfg = app->add_option("--config", src.config, "Experiment file (INI)")->check(CLI::ExistingFile);
  auto* pre = app->add_option("--preset", src.preset, "Built-in experiment")->check(CLI::IsMember({"fig1", "fig2", "slb"}));
  cfg->excludes(pre);
  if (required) app->callback([app, cfg, pre] {
      if (cfg->count() + pre->count() == 0) throw CLI::RequiredError(app->get_name() + ": --config or --preset");
    });
  app->add_option("--set", src.overrides, "Override section.key=value (repeatable)");
  app->add_option("--seed", src.seed, "Seed for rollouts and Monte Carlo integration");
  app->add_option("--jobs", src.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

// Owns an experiment handle built from --config/--preset plus overrides.
class Experiment {
 public:
  explicit Experiment(const Source& src) {
    if (!src.config.empty())
      check(qmdp_experiment_from_file(src.config.c_str(), &exp_));
    else
      check(qmdp_experiment_from_preset(src.preset.c_str(), &exp_));
    for (const std::string& kv : src.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "error: --set expects section.key=value, got '%s'\n", kv.c_str());
        throw Failure{QMDP_ERR_INPUT};
      }
      set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (src.seed) {
      set("eval.seed", std::to_string(*src.seed));
      set("integration.seed", std::to_string(*src.seed));
    }
  }
  ~Experiment() { qmdp_experiment_destroy(exp_); }
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  void set(const std::string& k, const std::string& v) { check(qmdp_experiment_set(exp_, k.c_str(), v.c_str())); }
  std::string get(const std::string& k, const std::string& fallback) const {
    const char* v = nullptr;
    check(qmdp_experiment_get(exp_, k.c_str(), &v));
    return v ? v : fallback;
  }
  int first_step() const {
    std::size_t count = 0;
    int step = 0;
    check(qmdp_experiment_steps(exp_, &step, 1, &count));
    return step;
  }
  qmdp_experiment* get() const { return exp_; }

 private:
  qmdp_experiment* exp_ = nullptr;
};

struct FiniteModel {
  qmdp_finite_mdp* fm = nullptr;
  ~FiniteModel() { qmdp_fmdp_destroy(fm); }
};

struct Solution {
  qmdp_solution* sol = nullptr;
  ~Solution() { qmdp_solution_destroy(sol); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-state approximation of continuous MDPs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(qmdp_version()));

  // discretize
  Source dsrc;
  int dstep = 0;
  std::string dout = "-";
  auto* disc = app.add_subcommand("discretize", "Build one finite model and write it as text");
  add_source(disc, dsrc);
  disc->add_option("--step", dstep, "Sweep step (default: first step)");
  disc->add_option("--out", dout, "Output path, - for stdout");

  // solve
  Source ssrc;
  std::string smdp, sout = "-", scrit;
  int sstep = 0;
  std::optional<double> stol, sdamp;
  std::optional<std::size_t> sref, smax;
  auto* solve = app.add_subcommand("solve", "Solve a finite model (from --mdp or an experiment step)");
  add_source(solve, ssrc, false);
  solve->add_option("--mdp", smdp, "Finite model file written by discretize")->check(CLI::ExistingFile);
  solve->add_option("--step", sstep, "Sweep step (default: first step)");
  solve->add_option("--criterion", scrit, "discounted or average")->check(CLI::IsMember({"discounted", "average"}));
  solve->add_option("--tol", stol, "Solver tolerance");
  solve->add_option("--damping", sdamp, "Relative value iteration damping in (0, 1]");
  solve->add_option("--ref-state", sref, "Relative value iteration reference state");
  solve->add_option("--max-iters", smax, "Iteration cap");
  solve->add_option("--out", sout, "Output path, - for stdout");

  // evaluate
  Source esrc;
  int estep = 0;
  std::optional<std::size_t> episodes;
  std::string eout = "-";
  auto* eval = app.add_subcommand("evaluate", "Roll out the extended policy of one step");
  add_source(eval, esrc);
  eval->add_option("--step", estep, "Sweep step (default: first step)");
  eval->add_option("--episodes", episodes, "Rollout episodes")->check(CLI::PositiveNumber);
  eval->add_option("--out", eout, "Output path, - for stdout");

  // sweep
  Source wsrc;
  std::string wout = "-", plot;
  bool no_wall = false;
  auto* sweep = app.add_subcommand("sweep", "Run every sweep step and write CSV rows");
  add_source(sweep, wsrc);
  sweep->add_option("--out", wout, "CSV path, - for stdout");
  sweep->add_option("--plot-data", plot, "Also write 'n value' series to this path");
  sweep->add_flag("--no-wall", no_wall, "Omit the wall_ms column");

  // order-opt
  Source osrc;
  std::string oout = "-";
  auto* order = app.add_subcommand("order-opt", "Per-stage distortion against the lower-bound floor");
  add_source(order, osrc);
  order->add_option("--out", oout, "CSV path, - for stdout");

  // bounds
  qmdp_bound_inputs bin{};
  bin.d = 1;
  double h_g = 0.0;
  long n_min = 1, n_max = 100, n_step = 1;
  std::optional<double> eps;
  std::string bout = "-";
  auto* bounds = app.add_subcommand("bounds", "Tabulate error bounds over a range of grid sizes");
  bounds->add_option("--K1", bin.K1, "Cost Lipschitz constant")->required();
  bounds->add_option("--K2", bin.K2, "Kernel Lipschitz constant (Wasserstein-1)")->required();
  bounds->add_option("--beta", bin.beta, "Discount factor")->required();
  bounds->add_option("--alpha", bin.alpha_cov, "Covering coefficient")->required();
  bounds->add_option("--d", bin.d, "State dimension")->check(CLI::PositiveNumber);
  bounds->add_option("--c-sup", bin.c_sup, "Sup-norm of the cost");
  bounds->add_option("--R", bin.R, "Ergodicity constant R (user supplied)");
  bounds->add_option("--kappa", bin.kappa, "Ergodicity rate kappa in (0, 1) (user supplied)");
  bounds->add_option("--h-g", h_g, "Noise differential entropy in bits");
  bounds->add_option("--n-min", n_min, "First grid size");
  bounds->add_option("--n-max", n_max, "Last grid size");
  bounds->add_option("--n-step", n_step, "Grid size stride");
  bounds->add_option("--eps", eps, "Print the smallest n whose discounted bound is <= eps instead");
  bounds->add_option("--out", bout, "CSV path, - for stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*disc) {
      Experiment exp(dsrc);
      FiniteModel fm;
      check(qmdp_fmdp_build(exp.get(), dstep ? dstep : exp.first_step(), dsrc.jobs, &fm.fm));
      check(qmdp_fmdp_save(fm.fm, dout.c_str()));
    } else if (*solve) {
      FiniteModel fm;
      qmdp_solver_options opts = qmdp_solver_options_default();
      std::string criterion = "discounted";
      opts.jobs = ssrc.jobs;
      if (!smdp.empty()) {
        check(qmdp_fmdp_load(smdp.c_str(), &fm.fm));
      } else if (!ssrc.config.empty() || !ssrc.preset.empty()) {
        Experiment exp(ssrc);
        check(qmdp_fmdp_build(exp.get(), sstep ? sstep : exp.first_step(), ssrc.jobs, &fm.fm));
        criterion = exp.get("solver.criterion", criterion);
        opts.tol = std::stod(exp.get("solver.tol", "1e-8"));
        opts.damping = std::stod(exp.get("solver.damping", "0.5"));
        opts.ref_state = std::stoul(exp.get("solver.ref_state", "0"));
        opts.max_iters = std::stoul(exp.get("solver.max_iters", "0"));
      } else {
        std::fprintf(stderr, "error: solve needs --mdp, --config or --preset\n");
        return 2;
      }
      if (!scrit.empty()) criterion = scrit;
      if (stol) opts.tol = *stol;
      if (sdamp) opts.damping = *sdamp;
      if (sref) opts.ref_state = *sref;
      if (smax) opts.max_iters = *smax;
      Solution sol;
      if (criterion == "average")
        check(qmdp_solve_average(fm.fm, &opts, &sol.sol));
      else
        check(qmdp_solve_discounted(fm.fm, &opts, &sol.sol));
      check(qmdp_solution_save(sol.sol, sout.c_str()));
    } else if (*eval) {
      Experiment exp(esrc);
      if (episodes) exp.set("eval.episodes", std::to_string(*episodes));
      const int step = estep ? estep : exp.first_step();
      qmdp_rollout_report rep{};
      check(qmdp_experiment_evaluate(exp.get(), step, esrc.jobs, &rep));
      FILE* f = eout == "-" ? stdout : std::fopen(eout.c_str(), "w");
      if (!f) {
        std::fprintf(stderr, "error: cannot open '%s' for writing\n", eout.c_str());
        return 1;
      }
      std::fprintf(f, "n,value_at_x0,rollout_estimate,rollout_stderr,episodes,horizon,escaped_episodes,seed\n");
      std::fprintf(f, "%d,%.17g,%.17g,%.17g,%zu,%zu,%zu,%llu\n", step, rep.value_at_x0, rep.estimate, rep.std_error,
                   rep.episodes, rep.horizon, rep.escaped_episodes, static_cast<unsigned long long>(rep.seed));
      if (f != stdout) std::fclose(f);
    } else if (*sweep) {
      Experiment exp(wsrc);
      qmdp_sweep_summary s{};
      check(qmdp_experiment_run_sweep(exp.get(), wsrc.jobs, wout.c_str(), plot.empty() ? nullptr : plot.c_str(),
                                      no_wall ? 0 : 1, &s));
      if (s.failed) std::fprintf(stderr, "warning: %zu of %zu steps failed (see the error column)\n", s.failed, s.rows);
      if (s.plot_empty) std::fprintf(stderr, "warning: plot data '%s' is empty\n", plot.c_str());
    } else if (*order) {
      Experiment exp(osrc);
      qmdp_sweep_summary s{};
      check(qmdp_experiment_run_order(exp.get(), osrc.jobs, oout.c_str(), &s));
      if (s.failed) std::fprintf(stderr, "warning: %zu of %zu steps failed (see the error column)\n", s.failed, s.rows);
    } else if (*bounds) {
      if (eps) {
        long n = 0;
        check(qmdp_grid_size_for_epsilon(&bin, *eps, &n));
        std::printf("%ld\n", n);
      } else {
        check(qmdp_bounds_csv(&bin, h_g, n_min, n_max, n_step, bout.c_str()));
      }
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error (%s): %s\n", qmdp_status_name(f.status), qmdp_last_error());
    return 1;
  }
  return 0;
}
