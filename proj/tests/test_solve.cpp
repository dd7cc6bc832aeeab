#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qmdp/error.hpp"
#include "qmdp/solve.hpp"
#include "support/oracles.hpp"

using namespace qmdp;

namespace {

FiniteMdp to_finite(const oracle::Mdp& m) { return FiniteMdp(m.ns, m.na, m.beta, m.cost, m.trans); }

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

// Two states, one action: c = (0, 1), P = [[.9, .1], [.2, .8]].
FiniteMdp two_state(double beta) {
  return FiniteMdp(2, 1, beta, {0.0, 1.0}, {0.9, 0.1, 0.2, 0.8});
}

}  // namespace

TEST_CASE("value iteration on a single absorbing state") {
  const FiniteMdp fm(1, 1, 0.5, {1.0}, {1.0});
  const SolveResult r = value_iteration(fm, 1e-10);
  CHECK(std::abs(r.values[0] - 2.0) <= 1e-10);
  CHECK(r.policy == Policy{0});
  CHECK_FALSE(r.gain.has_value());
}

TEST_CASE("two-state chain in closed form") {
  const FiniteMdp fm = two_state(0.5);
  const SolveResult r = value_iteration(fm, 1e-12);
  CHECK(std::abs(r.values[0] - 2.0 / 13.0) <= 1e-12);
  CHECK(std::abs(r.values[1] - 22.0 / 13.0) <= 1e-12);
  const std::vector<double> j = eval_policy_discounted(fm, Policy{0, 0});
  CHECK(std::abs(j[0] - 2.0 / 13.0) <= 1e-14);
  CHECK(std::abs(j[1] - 22.0 / 13.0) <= 1e-14);

  const std::vector<double> mu = invariant_distribution(fm, Policy{0, 0});
  CHECK(std::abs(mu[0] - 2.0 / 3.0) <= 1e-14);
  CHECK(std::abs(mu[1] - 1.0 / 3.0) <= 1e-14);
  CHECK(std::abs(eval_policy_average(fm, Policy{0, 0}) - 1.0 / 3.0) <= 1e-14);

  const SolveResult avg = relative_value_iteration(fm, 1e-12);
  REQUIRE(avg.gain.has_value());
  CHECK(std::abs(*avg.gain - 1.0 / 3.0) <= 1e-12);
  CHECK(avg.values[0] == 0.0);
  // Row 0 of g + h = c + P h with h(0) = 0 gives h(1) = 10 g.
  CHECK(std::abs(avg.values[1] - 10.0 / 3.0) <= 1e-10);
}

TEST_CASE("ties go to the smallest action index") {
  const FiniteMdp fm(2, 3, 0.9, {1.0, 1.0, 1.0, 2.0, 0.5, 0.5},
                     {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
  CHECK(value_iteration(fm, 1e-10).policy == Policy{0, 1});
  CHECK(relative_value_iteration(fm, 1e-10).policy == Policy{0, 1});
  const std::vector<double> zero(2, 0.0);
  CHECK(greedy_policy(fm, zero, 0.9) == Policy{0, 1});
}

TEST_CASE("invalid solver inputs") {
  const FiniteMdp fm = two_state(0.5);
  CHECK(kind_of([&] { value_iteration(fm, 0.0); }) == ErrorKind::Input);
  CHECK(kind_of([&] { value_iteration(two_state(1.0), 1e-8); }) == ErrorKind::Input);
  CHECK(kind_of([&] { relative_value_iteration(fm, 1e-8, 0.0); }) == ErrorKind::Input);
  CHECK(kind_of([&] { relative_value_iteration(fm, 1e-8, 0.5, 7); }) == ErrorKind::Input);
  CHECK(kind_of([&] { eval_policy_discounted(fm, Policy{0}); }) == ErrorKind::Input);
  CHECK(kind_of([&] { value_iteration(two_state(0.999), 1e-12, 5); }) == ErrorKind::Convergence);
}

TEST_CASE("periodic chain needs the aperiodicity transform") {
  const FiniteMdp flip(2, 1, 0.9, {0.0, 1.0}, {0.0, 1.0, 1.0, 0.0});
  CHECK(kind_of([&] { relative_value_iteration(flip, 1e-10, 1.0, 0, 1000); }) == ErrorKind::Convergence);
  const SolveResult r = relative_value_iteration(flip, 1e-10, 0.5);
  CHECK(std::abs(*r.gain - 0.5) <= 1e-10);
  CHECK(std::abs(eval_policy_average(flip, Policy{0, 0}) - 0.5) <= 1e-14);
}

TEST_CASE("reducible chain has no unique invariant distribution") {
  const FiniteMdp split(2, 1, 0.9, {0.0, 1.0}, {1.0, 0.0, 0.0, 1.0});
  CHECK(kind_of([&] { invariant_distribution(split, Policy{0, 0}); }) == ErrorKind::Numeric);
}

TEST_CASE("non-finite data is reported") {
  const FiniteMdp fm(1, 1, 0.5, {std::nan("")}, {1.0});
  CHECK(kind_of([&] { value_iteration(fm, 1e-8); }) == ErrorKind::Numeric);
}

TEST_CASE("property: value iteration matches exhaustive policy search") {
  for (double beta : {0.3, 0.9}) {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
      const oracle::Mdp m = oracle::random_mdp(seed, 5, 3, beta);
      const FiniteMdp fm = to_finite(m);
      const double tol = 1e-9;
      const SolveResult r = value_iteration(fm, tol);
      const std::vector<double> best = oracle::brute_force_discounted(m);
      CHECK(sup_diff(r.values, best) <= tol);
      // A greedy policy for a tol-accurate value is 2 beta tol / (1 - beta)-optimal.
      CHECK(sup_diff(oracle::discounted_value(m, r.policy), best) <= 2.0 * beta * tol / (1.0 - beta) + 1e-12);
      CHECK(r.residual <= tol);
    }
  }
}

TEST_CASE("property: successive VI deltas contract by beta") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const FiniteMdp fm = to_finite(oracle::random_mdp(seed, 6, 4, 0.9));
    const SolveResult r = value_iteration(fm, 1e-10);
    REQUIRE(r.delta_history.size() == r.iterations);
    for (std::size_t k = 1; k < r.delta_history.size(); ++k)
      CHECK(r.delta_history[k] <= 0.9 * r.delta_history[k - 1] + 1e-13);
  }
}

TEST_CASE("property: policy evaluation agrees with independent solvers") {
  for (std::uint64_t seed = 200; seed < 230; ++seed) {
    const oracle::Mdp m = oracle::random_mdp(seed, 6, 3, 0.9);
    const FiniteMdp fm = to_finite(m);
    Policy f(m.ns);
    for (std::size_t i = 0; i < m.ns; ++i) f[i] = (i * 7 + seed) % m.na;
    const std::vector<double> j = eval_policy_discounted(fm, f);
    CHECK(sup_diff(j, oracle::discounted_value(m, f)) <= 1e-10);
    CHECK(sup_diff(j, oracle::neumann_value(m, f)) <= 1e-9);

    const std::vector<double> mu = invariant_distribution(fm, f);
    double total = 0.0;
    for (double v : mu) {
      CHECK(v >= -1e-12);
      total += v;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    for (std::size_t k = 0; k < m.ns; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < m.ns; ++i) s += mu[i] * m.p(i, f[i], k);
      CHECK(std::abs(s - mu[k]) <= 1e-12);
    }
    const double g = eval_policy_average(fm, f);
    CHECK(std::abs(g - oracle::average_gain(m, f)) <= 1e-10);
    CHECK(std::abs(g - oracle::cesaro_average(m, f, 20000, 0)) <= 5e-3);
  }
}

TEST_CASE("property: RVI gain matches exhaustive search and ignores damping") {
  for (std::uint64_t seed = 300; seed < 340; ++seed) {
    const oracle::Mdp m = oracle::random_mdp(seed, 5, 3, 0.9);
    const FiniteMdp fm = to_finite(m);
    const double best = oracle::brute_force_average(m);
    const SolveResult half = relative_value_iteration(fm, 1e-10, 0.5);
    const SolveResult full = relative_value_iteration(fm, 1e-10, 1.0);
    CHECK(std::abs(*half.gain - best) <= 1e-6);
    CHECK(std::abs(*full.gain - best) <= 1e-6);
    CHECK(half.gain_lo <= *half.gain);
    CHECK(*half.gain <= half.gain_hi);
    CHECK(std::abs(oracle::average_gain(m, half.policy) - best) <= 1e-6);
    CHECK(half.values[half.ref_state] == 0.0);
    // Average-cost optimality equation on the undamped model.
    for (std::size_t i = 0; i < m.ns; ++i) {
      double q = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < m.na; ++a) {
        double s = m.c(i, a);
        for (std::size_t j = 0; j < m.ns; ++j) s += m.p(i, a, j) * half.values[j];
        q = std::min(q, s);
      }
      CHECK(std::abs(*half.gain + half.values[i] - q) <= 1e-6);
    }
  }
}

TEST_CASE("property: reference state does not change the gain") {
  const FiniteMdp fm = to_finite(oracle::random_mdp(11, 6, 3, 0.9));
  const double g0 = *relative_value_iteration(fm, 1e-11, 0.5, 0).gain;
  for (std::size_t ref = 1; ref < fm.n_states(); ++ref)
    CHECK(std::abs(*relative_value_iteration(fm, 1e-11, 0.5, ref).gain - g0) <= 1e-9);
}

TEST_CASE("property: solvers are deterministic across job counts") {
  for (std::uint64_t seed = 400; seed < 410; ++seed) {
    const FiniteMdp fm = to_finite(oracle::random_mdp(seed, 6, 4, 0.9));
    const SolveResult a = value_iteration(fm, 1e-10, 1'000'000, 1);
    const SolveResult b = value_iteration(fm, 1e-10, 1'000'000, 4);
    CHECK(a.values == b.values);
    CHECK(a.policy == b.policy);
    const SolveResult c = relative_value_iteration(fm, 1e-10, 0.5, 0, 100'000, 1);
    const SolveResult d = relative_value_iteration(fm, 1e-10, 0.5, 0, 100'000, 3);
    CHECK(c.values == d.values);
    CHECK(*c.gain == *d.gain);
  }
}

TEST_CASE("property: lowering a cost never raises the value") {
  for (std::uint64_t seed = 500; seed < 520; ++seed) {
    const oracle::Mdp m = oracle::random_mdp(seed, 6, 3, 0.9);
    oracle::Mdp cheaper = m;
    cheaper.cost[seed % cheaper.cost.size()] -= 1.0;
    const SolveResult a = value_iteration(to_finite(m), 1e-10);
    const SolveResult b = value_iteration(to_finite(cheaper), 1e-10);
    for (std::size_t i = 0; i < m.ns; ++i) CHECK(b.values[i] <= a.values[i] + 2e-10);
  }
}
