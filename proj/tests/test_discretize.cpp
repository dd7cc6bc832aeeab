#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "qmdp/compactification.hpp"
#include "qmdp/error.hpp"
#include "qmdp/finite_mdp.hpp"
#include "qmdp/quadrature.hpp"
#include "support/oracles.hpp"

using namespace qmdp;

namespace {

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

Compactification box(double l) { return Compactification{BoxSpace::interval(-l, l, true), std::nullopt}; }

}  // namespace

TEST_CASE("gauss-legendre nodes and exactness") {
  const QuadratureRule two = gauss_legendre(2);
  CHECK(two.nodes[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(two.nodes[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  const QuadratureRule three = gauss_legendre(3);
  CHECK(std::abs(three.nodes[1]) <= 1e-300);
  CHECK(three.weights[1] == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
  CHECK(three.nodes[2] == doctest::Approx(std::sqrt(0.6)).epsilon(1e-15));
  for (std::size_t m = 1; m <= 20; ++m) {
    const QuadratureRule r = gauss_legendre(m);
    // Exact for x^k, k <= 2m - 1: the integral over [-1, 1] is 2 / (k + 1) for even k, else 0.
    for (std::size_t k = 0; k <= 2 * m - 1; ++k) {
      double q = 0.0;
      for (std::size_t i = 0; i < m; ++i) q += r.weights[i] * std::pow(r.nodes[i], static_cast<double>(k));
      const double exact = k % 2 ? 0.0 : 2.0 / static_cast<double>(k + 1);
      CHECK(std::abs(q - exact) <= 1e-13);
    }
  }
  CHECK_THROWS_AS(gauss_legendre(0), Error);
}

TEST_CASE("atomic kernel on its own atoms reproduces the table exactly") {
  const std::vector<double> cost{1.5, -2.0, 0.25, 3.0};
  const std::vector<double> trans{0.5, 0.5, 0.125, 0.875, 1.0, 0.0, 0.25, 0.75};
  const ContinuousMdp m = make_atomic_embedding(2, 2, cost, trans, 0.9);
  const Quantizer sq = build_uniform_grid(m.state_space, 2);
  const Quantizer aq = build_action_grid(m.action_space, 2);
  const FiniteMdp fm = build_finite_mdp(m, sq, aq, WeightingSpec::point_mass(), IntegrationSpec::analytic());
  CHECK(fm.cost_matrix() == cost);
  CHECK(fm.transition_tensor() == trans);
  CHECK(fm.beta() == 0.9);
}

TEST_CASE("pseudo-state mass equals the gaussian tail outside K") {
  const ContinuousMdp m = make_additive_noise();
  const Compactification k = box(0.5);
  const Quantizer sq = build_uniform_grid(k.truncation, 2);
  const Quantizer aq = build_action_grid(m.action_space, 10);
  const FiniteMdp fm =
      build_finite_mdp(m, sq, aq, WeightingSpec::point_mass(), IntegrationSpec::analytic(), k);
  REQUIRE(fm.n_states() == 3);
  const double s = 0.1;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t a = 0; a < aq.size(); ++a) {
      const double f = sq.point(i)[0] + aq.point(a)[0];
      const double tail = 1.0 - oracle::normal_cdf((0.5 - f) / s) + oracle::normal_cdf((-0.5 - f) / s);
      CHECK(fm.p(i, a, 2) == doctest::Approx(tail).epsilon(1e-12).scale(1.0));
      CHECK(std::abs(fm.p(i, a, 2) - tail) <= 1e-12);
      const double left = oracle::normal_cdf(-f / s) - oracle::normal_cdf((-0.5 - f) / s);
      CHECK(std::abs(fm.p(i, a, 0) - left) <= 1e-12);
    }
  // The pseudo-state row is the quantized kernel from x = l + covering radius.
  const double x = 0.5 + 0.25;
  for (std::size_t a = 0; a < aq.size(); ++a) {
    const double f = x + aq.point(a)[0];
    CHECK(std::abs(fm.cost(2, a) - (x - aq.point(a)[0]) * (x - aq.point(a)[0])) <= 1e-15);
    const double stay = oracle::normal_cdf((0.5 - f) / s) - oracle::normal_cdf((-0.5 - f) / s);
    CHECK(std::abs((1.0 - fm.p(2, a, 2)) - stay) <= 1e-12);
  }
}

TEST_CASE("constant-in-state cost averages to itself") {
  AdditiveNoiseParams p;
  p.bounded = true;
  const ContinuousMdp base = make_additive_noise(p);
  ContinuousMdp m = base;
  m.cost = [](std::span<const double>, std::span<const double> a) { return 3.0 + a[0]; };
  const Quantizer sq = build_uniform_grid(m.state_space, 7);
  const Quantizer aq = build_action_grid(m.action_space, 4);
  const FiniteMdp u = build_finite_mdp(m, sq, aq, WeightingSpec::uniform_on_cell(), IntegrationSpec::analytic());
  const FiniteMdp pm = build_finite_mdp(m, sq, aq, WeightingSpec::point_mass(), IntegrationSpec::analytic());
  for (std::size_t r = 0; r < u.cost_matrix().size(); ++r)
    CHECK(u.cost_matrix()[r] == doctest::Approx(pm.cost_matrix()[r]).epsilon(1e-15));
}

TEST_CASE("truncated build: state count and pseudo-state row") {
  const ContinuousMdp m = make_additive_noise();
  const TruncationSchedule sched;
  const Compactification k1 = truncation_schedule(m, sched, 1);
  CHECK(k1.truncation.hi[0] == 0.75);
  const Quantizer sq = build_uniform_grid(k1.truncation, 8);  // ceil(2 * 5 * 0.75)
  const Quantizer aq = build_action_grid(m.action_space, 10);
  const FiniteMdp fm = build_truncated_mdp(m, sched, 1, sq, aq, WeightingSpec::mixture(0.5),
                                           IntegrationSpec::analytic());
  CHECK(fm.n_states() == 9);
  for (std::size_t a = 0; a < fm.n_actions(); ++a) {
    double s = 0.0;
    for (double v : fm.row(8, a)) s += v;
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
  CHECK_NOTHROW(fm.check_invariants(1e-9));
  CHECK(kind_of([&] {
          build_finite_mdp(m, sq, aq, WeightingSpec::point_mass(), IntegrationSpec::analytic());
        }) == ErrorKind::Input);
  CHECK(kind_of([&] {
          build_truncated_mdp(m, sched, 1, sq, aq, WeightingSpec::mixture(1.0), IntegrationSpec::analytic());
        }) == ErrorKind::Build);
}

TEST_CASE("pseudo-state inflow shrinks as the truncation grows") {
  const ContinuousMdp m = make_additive_noise();
  const TruncationSchedule sched;
  double prev = 2.0;
  for (int n = 1; n <= 15; ++n) {
    const double l = sched.half_width(n);
    const double km = 5.0 * ((n + 2) / 3);
    const Quantizer sq = build_uniform_grid(BoxSpace::interval(-l, l, true), static_cast<std::size_t>(std::ceil(2 * km * l - 1e-9)));
    const Quantizer aq = build_action_grid(m.action_space, static_cast<std::size_t>(2 * km));
    const FiniteMdp fm = build_truncated_mdp(m, sched, n, sq, aq, WeightingSpec::mixture(0.5),
                                             IntegrationSpec::analytic());
    double inflow = 0.0;
    for (std::size_t i = 0; i + 1 < fm.n_states(); ++i)
      for (std::size_t a = 0; a < fm.n_actions(); ++a) inflow += fm.p(i, a, fm.n_states() - 1);
    inflow /= static_cast<double>((fm.n_states() - 1) * fm.n_actions());
    CHECK(inflow < prev);
    prev = inflow;
  }
}

TEST_CASE("normalize_rows") {
  std::vector<double> ok{0.5, 0.5, 0.25, 0.75};
  normalize_rows(ok, 2, 1, 1e-5);
  CHECK(ok == std::vector<double>{0.5, 0.5, 0.25, 0.75});

  std::vector<double> near{0.3, 0.7000001, 0.5, 0.5};
  const NormalizationReport rep = normalize_rows(near, 2, 1, 1e-5);
  CHECK(near[0] == 0.3 / (0.3 + 0.7000001));
  CHECK(near[1] == 0.7000001 / (0.3 + 0.7000001));
  CHECK(rep.max_residual == doctest::Approx(1e-7).epsilon(1e-6));
  CHECK(rep.worst_state == 0);

  std::vector<double> bad{0.5, 0.5, 0.2, 0.2};
  CHECK(kind_of([&] { normalize_rows(bad, 2, 1, 1e-5); }) == ErrorKind::Build);
}

TEST_CASE("property: pushforward consistency with point-mass weighting") {
  const ContinuousMdp models[] = {make_additive_noise(), make_ricker()};
  for (const ContinuousMdp& m : models) {
    const bool truncated = m.state_space.unbounded;
    const BoxSpace region = truncated ? BoxSpace::interval(-1.5, 1.5, true) : m.state_space;
    const Quantizer sq = build_uniform_grid(region, 17);
    const Quantizer aq = build_action_grid(m.action_space, 5);
    const Compactification k{region, std::nullopt};
    const FiniteMdp fm = truncated ? build_finite_mdp(m, sq, aq, WeightingSpec::point_mass(), IntegrationSpec::analytic(), k)
                                   : build_finite_mdp(m, sq, aq, WeightingSpec::point_mass(), IntegrationSpec::analytic());
    // Union of cells first..last is the interval between their outer faces.
    const auto face = [&](std::size_t j) {
      if (j == 0) return truncated ? region.lo[0] : -std::numeric_limits<double>::infinity();
      if (j == sq.size()) return truncated ? region.hi[0] : std::numeric_limits<double>::infinity();
      return 0.5 * (sq.point(j - 1)[0] + sq.point(j)[0]);
    };
    for (std::size_t i = 0; i < sq.size(); i += 3)
      for (std::size_t a = 0; a < aq.size(); ++a)
        for (std::size_t first = 0; first < sq.size(); first += 4)
          for (std::size_t last = first; last < sq.size(); last += 5) {
            double sum = 0.0;
            for (std::size_t j = first; j <= last; ++j) sum += fm.p(i, a, j);
            const double direct =
                cell_probability(m, sq.point(i), aq.point(a), BoxSpace({face(first)}, {face(last + 1)}, true));
            CHECK(std::abs(sum - direct) <= 1e-9);
          }
  }
}

TEST_CASE("property: refinement consistency under uniform-on-cell weighting") {
  const ContinuousMdp m = make_additive_noise();
  const Compactification k{BoxSpace::interval(-1.25, 1.25, true), State{1.5}};
  const Quantizer aq = build_action_grid(m.action_space, 6);
  const Quantizer coarse_q = build_uniform_grid(k.truncation, 16);
  const Quantizer fine_q = build_uniform_grid(k.truncation, 32);
  const auto w = WeightingSpec::mixture(0.5);
  const FiniteMdp coarse = build_finite_mdp(m, coarse_q, aq, w, IntegrationSpec::analytic(), k);
  const FiniteMdp fine = build_finite_mdp(m, fine_q, aq, w, IntegrationSpec::analytic(), k);
  // Fine state j sits in coarse cell coarse_q.quantize(point j); the pseudo-state maps to itself.
  auto up = [&](std::size_t j) { return j == fine_q.size() ? coarse_q.size() : coarse_q.quantize(fine_q.point(j)); };
  double worst = 0.0;
  for (std::size_t i = 0; i < coarse.n_states(); ++i)
    for (std::size_t a = 0; a < aq.size(); ++a) {
      std::vector<double> agg(coarse.n_states(), 0.0);
      std::vector<std::size_t> members;
      for (std::size_t f = 0; f < fine.n_states(); ++f)
        if (up(f) == i) members.push_back(f);
      for (std::size_t f : members)
        for (std::size_t j = 0; j < fine.n_states(); ++j) agg[up(j)] += fine.p(f, a, j) / members.size();
      for (std::size_t j = 0; j < coarse.n_states(); ++j) worst = std::max(worst, std::abs(agg[j] - coarse.p(i, a, j)));
    }
  CHECK(worst <= 1e-6);
}

TEST_CASE("property: monte carlo tensor agrees with the analytic tensor") {
  const ContinuousMdp m = make_additive_noise();
  const Compactification k = box(0.75);
  const Quantizer sq = build_uniform_grid(k.truncation, 4);
  const Quantizer aq = build_action_grid(m.action_space, 3);
  const std::size_t n = 100000;
  const FiniteMdp exact = build_finite_mdp(m, sq, aq, WeightingSpec::uniform_on_cell(), IntegrationSpec::analytic(), k);
  const FiniteMdp mc =
      build_finite_mdp(m, sq, aq, WeightingSpec::uniform_on_cell(), IntegrationSpec::monte_carlo(n, 2024), k);
  std::size_t outside = 0, total = 0;
  for (std::size_t e = 0; e < exact.transition_tensor().size(); ++e) {
    const double p = exact.transition_tensor()[e];
    const double q = mc.transition_tensor()[e];
    const double se = std::sqrt(p * (1.0 - p) / n);
    ++total;
    if (std::abs(p - q) > 4.0 * se + 1.0 / n) ++outside;
  }
  CHECK(total == 5 * 3 * 5);
  CHECK(outside == 0);
  CHECK(mc.provenance.seed == 2024);
}

TEST_CASE("property: identical inputs build bit-identical models for any job count") {
  const ContinuousMdp m = make_additive_noise();
  const Compactification k = box(1.0);
  const Quantizer sq = build_uniform_grid(k.truncation, 20);
  const Quantizer aq = build_action_grid(m.action_space, 8);
  for (const IntegrationSpec& ispec : {IntegrationSpec::analytic(), IntegrationSpec::monte_carlo(2000, 5)}) {
    const FiniteMdp a = build_finite_mdp(m, sq, aq, WeightingSpec::mixture(0.5), ispec, k, 1);
    const FiniteMdp b = build_finite_mdp(m, sq, aq, WeightingSpec::mixture(0.5), ispec, k, 1);
    const FiniteMdp c = build_finite_mdp(m, sq, aq, WeightingSpec::mixture(0.5), ispec, k, 4);
    CHECK(a.identical(b));
    CHECK(a.identical(c));
  }
  const FiniteMdp s1 = build_finite_mdp(m, sq, aq, WeightingSpec::uniform_on_cell(), IntegrationSpec::monte_carlo(2000, 5), k);
  const FiniteMdp s2 = build_finite_mdp(m, sq, aq, WeightingSpec::uniform_on_cell(), IntegrationSpec::monte_carlo(2000, 6), k);
  CHECK_FALSE(s1.identical(s2));
}

TEST_CASE("ricker and two-dimensional builds are stochastic") {
  const ContinuousMdp rk = make_ricker();
  const FiniteMdp r = build_finite_mdp(rk, build_uniform_grid(rk.state_space, 30), build_action_grid(rk.action_space, 20),
                                       WeightingSpec::uniform_on_cell(), IntegrationSpec::analytic());
  CHECK_NOTHROW(r.check_invariants(1e-9));
  CHECK(r.maximize);

  AdditiveNoiseParams p;
  p.dim = 2;
  p.dynamics = "0.5*x+a";
  const ContinuousMdp m2 = make_additive_noise(p);
  const Compactification k{BoxSpace({-1.0, -1.0}, {1.0, 1.0}, true), std::nullopt};
  const Quantizer sq = build_uniform_grid(k.truncation, 5);
  const Quantizer aq = build_action_grid(m2.action_space, 2);
  const FiniteMdp fm = build_finite_mdp(m2, sq, aq, WeightingSpec::uniform_on_cell(), IntegrationSpec::gauss_legendre(3), k);
  CHECK(fm.n_states() == 26);
  CHECK(fm.n_actions() == 4);
  CHECK_NOTHROW(fm.check_invariants(1e-9));
  // Product form: mass in cell (0, 0) from the centre point is the product of axis masses.
  const FiniteMdp pm = build_finite_mdp(m2, sq, aq, WeightingSpec::point_mass(), IntegrationSpec::analytic(), k);
  const State& z = sq.point(12);
  const State& a = aq.point(0);
  const BoxSpace cell({-1.0, -1.0}, {-0.6, -0.6}, true);
  CHECK(std::abs(pm.p(12, 0, 0) - cell_probability(m2, z, a, cell)) <= 1e-12);
}

TEST_CASE("text format round-trips losslessly") {
  const ContinuousMdp m = make_additive_noise();
  const Compactification k = box(0.75);
  FiniteMdp fm = build_finite_mdp(m, build_uniform_grid(k.truncation, 6), build_action_grid(m.action_space, 3),
                                  WeightingSpec::mixture(0.5), IntegrationSpec::analytic(), k);
  std::stringstream ss;
  write_finite_mdp(ss, fm);
  const std::string text = ss.str();
  CHECK(text.rfind("finite_mdp 7 3 0.29999999999999999 0\n", 0) == 0);
  const FiniteMdp back = read_finite_mdp(ss);
  CHECK(back.identical(fm));
  CHECK(back.provenance.model_name == fm.provenance.model_name);
  CHECK(back.provenance.integration == "analytic-cdf");

  std::istringstream broken("finite_mdp 2 1 0.5 0\n1\n");
  CHECK(kind_of([&] { read_finite_mdp(broken); }) == ErrorKind::Io);
}
