#include "qmdp/solve.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qmdp/error.hpp"
#include "qmdp/parallel.hpp"

namespace qmdp {

namespace {

// Nonzero column range of every (state, action) row; the discretized kernels
// are banded, so sweeps only touch the support.
struct RowSupport {
  std::vector<std::size_t> first;
  std::vector<std::size_t> last;  // one past
};

RowSupport row_support(const FiniteMdp& fm) {
  const std::size_t rows = fm.n_states() * fm.n_actions();
  RowSupport s{std::vector<std::size_t>(rows, 0), std::vector<std::size_t>(rows, 0)};
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = fm.row(r / fm.n_actions(), r % fm.n_actions());
    std::size_t f = 0;
    while (f < row.size() && row[f] == 0.0) ++f;
    std::size_t l = row.size();
    while (l > f && row[l - 1] == 0.0) --l;
    s.first[r] = f;
    s.last[r] = l;
  }
  return s;
}

// out[i] = min_a C[i][a] + scale * (P[i][a] . v) + diag * v[i]; optionally records argmin.
void bellman(const FiniteMdp& fm, const RowSupport& sup, std::span<const double> v, double scale, double diag,
             std::span<double> out, Policy* argmin, int jobs) {
  const std::size_t na = fm.n_actions();
  parallel_for(fm.n_states(), jobs, [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_a = 0;
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t r = i * na + a;
      const auto row = fm.row(i, a);
      double ev = 0.0;
      for (std::size_t j = sup.first[r]; j < sup.last[r]; ++j) ev += row[j] * v[j];
      const double q = fm.cost(i, a) + scale * ev + diag * v[i];
      if (q < best) {
        best = q;
        best_a = a;
      }
    }
    out[i] = best;
    if (argmin) (*argmin)[i] = best_a;
  });
}

void check_finite(std::span<const double> v, std::size_t iteration, const char* who) {
  for (double x : v)
    if (!std::isfinite(x))
      fail(ErrorKind::Numeric, std::string(who) + ": non-finite iterate at iteration " + std::to_string(iteration));
}

void check_policy(const FiniteMdp& fm, std::span<const std::size_t> policy) {
  require(policy.size() == fm.n_states(), "policy length does not match the number of states");
  for (std::size_t a : policy) require(a < fm.n_actions(), "policy action index out of range");
}

Eigen::MatrixXd policy_matrix(const FiniteMdp& fm, std::span<const std::size_t> policy) {
  const std::size_t n = fm.n_states();
  Eigen::MatrixXd p(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = fm.row(i, policy[i]);
    for (std::size_t j = 0; j < n; ++j) p(i, j) = row[j];
  }
  return p;
}

}  // namespace

Policy greedy_policy(const FiniteMdp& fm, std::span<const double> values, double discount) {
  require(values.size() == fm.n_states(), "value vector length does not match the number of states");
  Policy pol(fm.n_states(), 0);
  std::vector<double> scratch(fm.n_states());
  bellman(fm, row_support(fm), values, discount, 0.0, scratch, &pol, 1);
  return pol;
}

SolveResult value_iteration(const FiniteMdp& fm, double tol, std::size_t max_iters, int jobs) {
  require(tol > 0.0, "value iteration needs tol > 0");
  const double beta = fm.beta();
  require(beta > 0.0 && beta < 1.0, "value iteration needs beta in (0, 1)");
  const std::size_t n = fm.n_states();
  const RowSupport sup = row_support(fm);
  const double stop = tol * (1.0 - beta) / (2.0 * beta);

  SolveResult res;
  std::vector<double> j(n, 0.0), next(n, 0.0);
  bool converged = false;
  for (std::size_t k = 1; k <= max_iters; ++k) {
    bellman(fm, sup, j, beta, 0.0, next, nullptr, jobs);
    check_finite(next, k, "value iteration");
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) delta = std::max(delta, std::abs(next[i] - j[i]));
    res.delta_history.push_back(delta);
    j.swap(next);
    res.iterations = k;
    if (delta <= stop) {
      converged = true;
      break;
    }
  }
  if (!converged)
    fail(ErrorKind::Convergence, "value iteration did not reach tol " + std::to_string(tol) + " in " +
                                     std::to_string(max_iters) + " iterations");

  res.policy.assign(n, 0);
  bellman(fm, sup, j, beta, 0.0, next, &res.policy, jobs);
  double residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) residual = std::max(residual, std::abs(next[i] - j[i]));
  res.residual = residual;
  res.values = std::move(j);
  return res;
}

SolveResult relative_value_iteration(const FiniteMdp& fm, double tol, double damping, std::size_t ref_state,
                                     std::size_t max_iters, int jobs) {
  require(tol > 0.0, "relative value iteration needs tol > 0");
  require(damping > 0.0 && damping <= 1.0, "damping must lie in (0, 1]");
  require(ref_state < fm.n_states(), "reference state out of range");
  const std::size_t n = fm.n_states();
  const RowSupport sup = row_support(fm);

  SolveResult res;
  res.damping = damping;
  res.ref_state = ref_state;
  std::vector<double> h(n, 0.0), th(n, 0.0);
  bool converged = false;
  for (std::size_t k = 1; k <= max_iters; ++k) {
    bellman(fm, sup, h, damping, 1.0 - damping, th, nullptr, jobs);
    check_finite(th, k, "relative value iteration");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = th[i] - h[i];
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    const double span = hi - lo;
    res.delta_history.push_back(span);
    res.iterations = k;
    if (span <= tol) {
      res.gain_lo = lo;
      res.gain_hi = hi;
      res.gain = 0.5 * (lo + hi);
      res.residual = span;
      converged = true;
      break;
    }
    const double anchor = th[ref_state];
    for (std::size_t i = 0; i < n; ++i) h[i] = th[i] - anchor;
  }
  if (!converged) {
    std::ostringstream os;
    os << "relative value iteration: span did not contract below " << tol << " in " << max_iters
       << " iterations; last spans:";
    const std::size_t tail = std::min<std::size_t>(5, res.delta_history.size());
    for (std::size_t k = res.delta_history.size() - tail; k < res.delta_history.size(); ++k)
      os << ' ' << res.delta_history[k];
    fail(ErrorKind::Convergence, os.str());
  }
  // Bias of the undamped model: h_damped solves rho + damping h = c + damping P h.
  for (double& v : h) v *= damping;
  res.policy.assign(n, 0);
  bellman(fm, sup, h, 1.0, 0.0, th, &res.policy, jobs);
  res.values = std::move(h);
  return res;
}

std::vector<double> eval_policy_discounted(const FiniteMdp& fm, std::span<const std::size_t> policy) {
  check_policy(fm, policy);
  const std::size_t n = fm.n_states();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - fm.beta() * policy_matrix(fm, policy);
  Eigen::VectorXd c(n);
  for (std::size_t i = 0; i < n; ++i) c(i) = fm.cost(i, policy[i]);
  const Eigen::VectorXd j = a.partialPivLu().solve(c);
  const double resid = (a * j - c).lpNorm<Eigen::Infinity>();
  const double scale = c.lpNorm<Eigen::Infinity>();
  if (!j.allFinite() || resid > 1e-10 * scale)
    fail(ErrorKind::Numeric, "policy evaluation system is singular or ill-conditioned (residual " +
                                 std::to_string(resid) + ")");
  return {j.data(), j.data() + n};
}

std::vector<double> invariant_distribution(const FiniteMdp& fm, std::span<const std::size_t> policy) {
  check_policy(fm, policy);
  const std::size_t n = fm.n_states();
  const Eigen::MatrixXd p = policy_matrix(fm, policy);
  if (n > 1) {
    // The eigenvalue 1 must be simple; report the distance of the next one to 1.
    Eigen::EigenSolver<Eigen::MatrixXd> es(p, false);
    std::vector<double> dist;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
      dist.push_back(std::abs(es.eigenvalues()(k) - std::complex<double>(1.0, 0.0)));
    std::sort(dist.begin(), dist.end());
    const double gap = dist[1];
    if (gap < 1e-9) {
      std::ostringstream os;
      os << "induced chain has no unique invariant distribution (spectral gap " << gap << ")";
      fail(ErrorKind::Numeric, os.str());
    }
  }
  // mu (P - I) = 0 with the last equation replaced by sum(mu) = 1.
  Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  const Eigen::VectorXd mu = a.fullPivLu().solve(b);
  if (!mu.allFinite()) fail(ErrorKind::Numeric, "invariant distribution solve failed");
  return {mu.data(), mu.data() + n};
}

double eval_policy_average(const FiniteMdp& fm, std::span<const std::size_t> policy) {
  const std::vector<double> mu = invariant_distribution(fm, policy);
  double rho = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) rho += mu[i] * fm.cost(i, policy[i]);
  return rho;
}

}  // namespace qmdp
