#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qmdp/compactification.hpp"
#include "qmdp/error.hpp"
#include "qmdp/quantizer.hpp"

using namespace qmdp;

namespace {

bool is_input_error(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() == ErrorKind::Input;
  }
  return false;
}

}  // namespace

TEST_CASE("uniform grid examples") {
  const Quantizer one = build_uniform_grid(BoxSpace::interval(0.0, 1.0), 1);
  REQUIRE(one.size() == 1);
  CHECK(one.point(0)[0] == 0.5);
  CHECK(one.covering_radius() == 0.5);

  const Quantizer two = build_uniform_grid(BoxSpace::interval(-0.5, 0.5), 2);
  REQUIRE(two.size() == 2);
  CHECK(two.point(0)[0] == -0.25);
  CHECK(two.point(1)[0] == 0.25);
  CHECK(two.covering_radius() == 0.25);

  const Quantizer rk = build_uniform_grid(BoxSpace::interval(0.005, 7.0), 10);
  CHECK(rk.point(0)[0] == doctest::Approx(0.35475).epsilon(1e-14));
  CHECK(rk.point(1)[0] - rk.point(0)[0] == doctest::Approx(0.6995).epsilon(1e-13));
  CHECK(rk.point(2)[0] == doctest::Approx(1.75375).epsilon(1e-14));

  CHECK(is_input_error([] { build_uniform_grid(BoxSpace::interval(0.0, 1.0), 0); }));
  CHECK(is_input_error([] { BoxSpace::interval(1.0, 1.0); }));
}

TEST_CASE("quantize: ties, nearest neighbour, totality") {
  const Quantizer two = build_uniform_grid(BoxSpace::interval(-0.5, 0.5), 2);
  CHECK(two.quantize(State{0.0}) == 0);
  CHECK(two.quantize(State{0.1}) == 1);
  CHECK(two.quantize(State{-0.1}) == 0);
  CHECK(two.quantize(State{100.0}) == 1);
  CHECK(two.quantize(State{-100.0}) == 0);
  const Quantizer rk = build_uniform_grid(BoxSpace::interval(0.005, 7.0), 10);
  CHECK(rk.quantize(State{2.0}) == 2);

  // The same tie rule on an unstructured point set.
  const Quantizer loose({State{0.25}, State{-0.25}}, BoxSpace::interval(-0.5, 0.5));
  CHECK_FALSE(loose.is_cartesian());
  CHECK(loose.quantize(State{0.0}) == 0);
  CHECK(is_input_error([] { Quantizer({State{0.1}, State{0.1}}, BoxSpace::interval(0.0, 1.0)); }));
}

TEST_CASE("action grids") {
  CHECK(build_action_grid(BoxSpace::interval(-0.5, 0.5), 2 * 5).size() == 10);
  const Quantizer single = build_action_grid(BoxSpace::interval(-0.5, 0.5), 1);
  REQUIRE(single.size() == 1);
  CHECK(single.point(0)[0] == 0.0);
  CHECK(build_action_grid(BoxSpace::interval(0.005, 7.0), 50).size() == 50);
}

TEST_CASE("property: covering radius and partition on a probe") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t d = 1 + trial % 3;
    std::uniform_real_distribution<double> lo_d(-3.0, 0.0), w_d(0.5, 4.0);
    std::vector<double> lo(d), hi(d);
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = lo_d(rng);
      hi[j] = lo[j] + w_d(rng);
    }
    const BoxSpace space(lo, hi);
    const std::size_t n = 1 + rng() % (d == 1 ? 40 : 8);
    const Quantizer q = build_uniform_grid(space, n);
    CHECK(q.size() == static_cast<std::size_t>(std::pow(n, d)));
    std::vector<std::size_t> owner_count(q.size(), 0);
    for (int s = 0; s < 10000; ++s) {
      State z(d);
      for (std::size_t j = 0; j < d; ++j) z[j] = std::uniform_real_distribution<double>(lo[j], hi[j])(rng);
      const std::size_t i = q.quantize(z);
      REQUIRE(i < q.size());
      ++owner_count[i];
      CHECK(distance(z, q.point(i)) <= q.covering_radius() + 1e-12);
      // Nearest among all points: no other point is strictly closer.
      const double di = distance(z, q.point(i));
      for (std::size_t k = 0; k < q.size(); ++k) CHECK(distance(z, q.point(k)) >= di - 1e-15);
    }
    // Probe points land in exactly one cell each; every cell is hit for coarse grids.
    std::size_t total = 0;
    for (std::size_t c : owner_count) total += c;
    CHECK(total == 10000);
    if (q.size() <= 16)
      for (std::size_t c : owner_count) CHECK(c > 0);
  }
}

TEST_CASE("property: 1-D covering rate law") {
  for (double a : {-1.0, 0.005, 2.5})
    for (double b : {a + 0.5, a + 7.0})
      for (std::size_t n = 1; n <= 200; n += 7) {
        const Quantizer q = build_uniform_grid(BoxSpace::interval(a, b), n);
        CHECK(q.covering_radius() * static_cast<double>(n) == doctest::Approx((b - a) / 2.0).epsilon(1e-14));
        CHECK(q.probe_covering_radius(4001) <= q.covering_radius() + 1e-12);
      }
}

TEST_CASE("property: quantize is idempotent on grid points") {
  for (std::size_t d = 1; d <= 3; ++d) {
    const BoxSpace space(std::vector<double>(d, -1.0), std::vector<double>(d, 2.0));
    const Quantizer q = build_uniform_grid(space, d == 1 ? 37 : 6);
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(q.quantize(q.point(i)) == i);
  }
}

TEST_CASE("truncation schedule") {
  const TruncationSchedule s;
  CHECK(s.half_width(1) == 0.75);
  CHECK(s.half_width(15) == 4.25);
  BoxSpace prev;
  for (int n = 1; n <= 15; ++n) {
    const BoxSpace k(std::vector<double>{-s.half_width(n)}, std::vector<double>{s.half_width(n)}, true);
    if (n > 1) CHECK(prev.strictly_inside(k));
    prev = k;
  }
  TruncationSchedule bad;
  bad.slope = 0.0;
  CHECK(is_input_error([&] { bad.validate(); }));
}

TEST_CASE("outside point defaults just beyond the upper face") {
  const Compactification c{BoxSpace::interval(-0.75, 0.75, true), std::nullopt};
  const Quantizer grid = build_uniform_grid(c.truncation, 8);
  const State x = c.resolve_outside_point(grid);
  CHECK(x[0] == doctest::Approx(0.75 + 1.5 / 16.0).epsilon(1e-15));
  CHECK_FALSE(c.truncation.contains(x));
  CHECK(c.pseudo_state_index(grid) == 8);
  const Compactification inside{BoxSpace::interval(-0.75, 0.75, true), State{0.1}};
  CHECK(is_input_error([&] { inside.resolve_outside_point(grid); }));
}

TEST_CASE("weighting specs") {
  CHECK(parse_weighting_kind("uniform-on-cell") == WeightingSpec::Kind::UniformOnCell);
  CHECK(parse_weighting_kind("point-mass") == WeightingSpec::Kind::PointMass);
  CHECK(parse_weighting_kind("mixture") == WeightingSpec::Kind::Mixture);
  CHECK(is_input_error([] { parse_weighting_kind("gaussian"); }));
  CHECK(is_input_error([] { WeightingSpec::mixture(1.5).validate(); }));
  CHECK_NOTHROW(WeightingSpec::mixture(0.5).validate());
}
