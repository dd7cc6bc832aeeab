#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qmdp/bounds.hpp"
#include "qmdp/error.hpp"

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

BoundInputs worked_example() {
  BoundInputs in;
  in.beta = 0.5;
  in.K1 = 1.0;
  in.K2 = 1.0;
  in.alpha_cov = 0.5;
  in.d = 1;
  return in;
}

BoundInputs random_inputs(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BoundInputs in;
  in.beta = 0.05 + 0.9 * u(rng);
  in.K2 = 0.95 * u(rng) / in.beta;
  in.K1 = 5.0 * u(rng);
  in.alpha_cov = 0.1 + u(rng);
  in.d = 1 + static_cast<int>(rng() % 4);
  in.c_sup = 0.5 + 3.0 * u(rng);
  in.R = 0.5 + 3.0 * u(rng);
  in.kappa = 0.1 + 0.8 * u(rng);
  return in;
}

}  // namespace

TEST_CASE("worked example gives 81 / n exactly") {
  const BoundInputs in = worked_example();
  for (long n = 1; n <= 10000; ++n) CHECK(discounted_rate_bound(in, n) == 81.0 / static_cast<double>(n));
}

TEST_CASE("grid size for a target accuracy") {
  const BoundInputs in = worked_example();
  CHECK(grid_size_for_epsilon(in, 1.0) == 81);
  CHECK(grid_size_for_epsilon(in, 0.1) == 810);
  CHECK(grid_size_for_epsilon(in, 0.7) == 116);
  CHECK(grid_size_for_epsilon(in, 100.0) == 1);
  BoundInputs two = in;
  two.d = 2;
  // 81 / sqrt(n) <= 1 first at n = 6561.
  CHECK(grid_size_for_epsilon(two, 1.0) == 6561);
  CHECK(kind_of([&] { grid_size_for_epsilon(in, 0.0); }) == ErrorKind::Input);
  CHECK(kind_of([&] { grid_size_for_epsilon(two, 1e-9); }) == ErrorKind::Input);
}

TEST_CASE("discounted bound preconditions") {
  BoundInputs in = worked_example();
  in.K2 = 2.0;
  CHECK(kind_of([&] { discounted_rate_bound(in, 4); }) == ErrorKind::Precondition);
  in.K2 = 1.0;
  CHECK(kind_of([&] { discounted_rate_bound(in, 0); }) == ErrorKind::Input);
  in.beta = 1.0;
  CHECK(kind_of([&] { discounted_rate_bound(in, 4); }) == ErrorKind::Input);
}

TEST_CASE("unit ball volumes") {
  const double pi = std::numbers::pi;
  CHECK(unit_ball_volume(0) == 1.0);
  CHECK(unit_ball_volume(1) == 2.0);
  CHECK(unit_ball_volume(2) == doctest::Approx(pi).epsilon(1e-15));
  CHECK(unit_ball_volume(3) == doctest::Approx(4.0 * pi / 3.0).epsilon(1e-15));
  CHECK(unit_ball_volume(4) == doctest::Approx(pi * pi / 2.0).epsilon(1e-15));
  CHECK(unit_ball_volume(5) == doctest::Approx(8.0 * pi * pi / 15.0).epsilon(1e-15));
  for (int d = 1; d <= 12; ++d)
    CHECK(unit_ball_volume(d) ==
          doctest::Approx(std::pow(pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0)).epsilon(1e-13));
}

TEST_CASE("shannon lower bound floor") {
  for (long n = 1; n <= 10000; ++n) CHECK(slb_floor(1, 0.0, n) == 0.25 / static_cast<double>(n));
  CHECK(slb_constant(1, 0.0) == 0.25);
  CHECK(slb_constant(1, 1.0) == 0.5);
  CHECK(slb_constant(2, 0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-15));
  CHECK(slb_constant(3, 0.0) == doctest::Approx(1.5 * std::cbrt(1.0 / (8.0 * std::numbers::pi))).epsilon(1e-15));
  CHECK(slb_floor_discounted(1, 0.0, 5, 0.5) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(kind_of([] { slb_floor(0, 0.0, 3); }) == ErrorKind::Input);
}

TEST_CASE("average bound with moduli") {
  BoundInputs in = worked_example();
  in.c_sup = 2.0;
  in.R = 1.5;
  in.kappa = 0.5;
  in.omega_c = [](double r) { return std::sqrt(r); };
  in.omega_p = [](double r) { return r; };
  // d_n = 2 * 0.5 / 4 = 0.25 at n = 4.
  const double expect = 4.0 * 2.0 * 1.5 * 0.125 + 2.0 * 0.5 + 2.0 * 2.0 * 3.0 * 0.25;
  CHECK(average_rate_bound_modulus(in, 4, 3) == doctest::Approx(expect).epsilon(1e-15));
  BoundInputs missing = in;
  missing.omega_p = nullptr;
  CHECK(kind_of([&] { average_rate_bound_modulus(missing, 4, 3); }) == ErrorKind::Input);
}

TEST_CASE("lipschitz average bound preconditions") {
  BoundInputs in = worked_example();
  in.c_sup = 1.0;
  in.R = 1.0;
  in.kappa = 0.5;
  in.K2 = 0.0;
  CHECK(kind_of([&] { average_rate_bound_lipschitz(in, 10); }) == ErrorKind::Precondition);
  in.K2 = 1.0;
  in.kappa = 1.0;
  CHECK(kind_of([&] { average_rate_bound_lipschitz(in, 10); }) == ErrorKind::Input);
}

TEST_CASE("property: discounted bound is homogeneous of degree -1/d") {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 10; ++k) {
    const BoundInputs in = random_inputs(rng);
    const double base = discounted_rate_bound(in, 1);
    for (long n = 1; n <= 10000; ++n) {
      const double scaled = discounted_rate_bound(in, n) * std::pow(static_cast<double>(n), 1.0 / in.d);
      CHECK(std::abs(scaled - base) <= 1e-12 * base);
    }
  }
}

TEST_CASE("property: discounted bound is monotone in its constants") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    const BoundInputs in = random_inputs(rng);
    BoundInputs more = in;
    more.K1 *= 1.1;
    CHECK(discounted_rate_bound(more, 10) >= discounted_rate_bound(in, 10));
    more = in;
    more.K2 = std::min(in.K2 * 1.05, 0.999 / in.beta);
    CHECK(discounted_rate_bound(more, 10) >= discounted_rate_bound(in, 10));
    more = in;
    more.alpha_cov *= 2.0;
    CHECK(discounted_rate_bound(more, 10) == doctest::Approx(2.0 * discounted_rate_bound(in, 10)).epsilon(1e-14));
  }
}

TEST_CASE("property: lipschitz average bound is the optimised modulus bound") {
  std::mt19937_64 rng(99);
  int asymptotic = 0, pre = 0;
  for (int k = 0; k < 40; ++k) {
    BoundInputs in = random_inputs(rng);
    in.K2 = std::max(in.K2, 0.05);
    BoundInputs lin = in;
    lin.omega_c = [K = in.K1](double r) { return K * r; };
    lin.omega_p = [K = in.K2](double r) { return K * r; };
    for (long n : {1L, 10L, 1000L, 100000L, 10000000L}) {
      const AverageBound b = average_rate_bound_lipschitz(in, n);
      CHECK(b.pre_asymptotic == (b.t_prime < 1.0));
      if (b.pre_asymptotic) {
        ++pre;
        CHECK(b.value == average_rate_bound_modulus(lin, n, 1));
        continue;
      }
      ++asymptotic;
      // Value of the modulus bound relaxed to real t, minimised at t'.
      const double root = std::pow(static_cast<double>(n), 1.0 / in.d);
      const auto relaxed = [&](double t) {
        return 4.0 * in.c_sup * in.R * std::pow(in.kappa, t) +
               (4.0 * in.K1 * in.alpha_cov + 4.0 * in.c_sup * in.K2 * in.alpha_cov * t) / root;
      };
      CHECK(b.value == doctest::Approx(relaxed(b.t_prime)).epsilon(1e-12));
      CHECK(relaxed(b.t_prime - 1e-3) >= b.value);
      CHECK(relaxed(b.t_prime + 1e-3) >= b.value);
      for (long t = 0; t <= 400; ++t) CHECK(b.value <= average_rate_bound_modulus(lin, n, t) * (1.0 + 1e-12));
    }
  }
  CHECK(asymptotic > 0);
  CHECK(pre > 0);
}
