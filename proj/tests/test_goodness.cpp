#include <doctest.h>

#include "apmatch/errors.hpp"
#include "apmatch/goodness.hpp"
#include "oracles.hpp"

using namespace apm;

namespace {

Pattern random_pattern(const Cube& cube, Rng& rng) {
  BitGrid g(cube.extents());
  for_each_site(cube.at({0, 0, 0}), [&](const Point& x) { g.set(x, rng.bernoulli(0.5)); });
  return Pattern(cube, std::move(g));
}

Pattern reflect_first_axis(const Pattern& a) {
  BitGrid g(a.cube().extents());
  const std::int64_t n = a.cube().n();
  for_each_site(a.cube().at({0, 0, 0}), [&](const Point& x) {
    Point y = x;
    y[0] = n - x[0];
    g.set(y, a.at(x));
  });
  return Pattern(a.cube(), std::move(g));
}

}  // namespace

TEST_SUITE("goodness") {
  TEST_CASE("disagreement profile of a checkerboard") {
    const Pattern a = Pattern::checkerboard(Cube(2, 2));
    const DisagreementProfile prof = disagreement_profile(a, 1);
    CHECK(prof.entries.size() == 8);
    CHECK(prof.at({1, 0, 0}).disagreement == 6);
    CHECK(prof.at({1, 0, 0}).overlap == 6);
    CHECK(prof.at({0, -1, 0}).disagreement == 6);
    CHECK(prof.at({1, 1, 0}).disagreement == 0);
    CHECK(prof.at({1, 1, 0}).overlap == 4);
    CHECK_THROWS_AS((void)prof.at({0, 0, 0}), DomainError);
    CHECK_THROWS_AS(disagreement_profile(a, 3), ArgumentError);
  }

  TEST_CASE("goodness examples") {
    const Cube c3(3, 1);
    CHECK_FALSE(is_good(Pattern::constant(c3, true), GoodnessParams(0.0, 0.4, c3)));
    CHECK(is_good(Pattern::checkerboard(c3), GoodnessParams(0.0, 0.4, c3)));
    const Cube sq(3, 2);
    CHECK_FALSE(is_good(Pattern::checkerboard(sq), GoodnessParams(0.0, 0.4, sq)));
    const Cube tiny(1, 2);
    const GoodnessParams vac(0.1, 0.4, tiny);
    CHECK(vac.vacuous());
    CHECK(is_good(Pattern::constant(tiny, false), vac));
    CHECK_THROWS_AS(GoodnessParams(1.0, 0.4, sq), ArgumentError);
    CHECK_THROWS_AS(GoodnessParams(0.1, 0.0, sq), ArgumentError);
    CHECK_THROWS_AS(is_good(Pattern::constant(c3, true), GoodnessParams(0.0, 0.4, sq)), ArgumentError);
  }

  TEST_CASE("fraction examples") {
    const SeedSpec seed{1};
    CHECK(goodness_fraction(FieldModel::bernoulli(0.5), GoodnessParams(0.1, 0.4, Cube(1, 1)), 10, seed).value == 1.0);
    const Estimate f = goodness_fraction(FieldModel::bernoulli(0.5), GoodnessParams(0.0, 0.4, Cube(3, 1)), 10, seed);
    CHECK(f.method == Method::exact);
    CHECK(f.value == doctest::Approx(14.0 / 16.0).epsilon(1e-12));
    // p = 0.3: everything except the two constant strings
    const Estimate g = goodness_fraction(FieldModel::bernoulli(0.3), GoodnessParams(0.0, 0.4, Cube(3, 1)), 10, seed);
    CHECK(g.value == doctest::Approx(1.0 - std::pow(0.3, 4) - std::pow(0.7, 4)).epsilon(1e-12));
  }

  TEST_CASE("fast test agrees with literal enumeration") {
    Rng rng(41);
    for (int t = 0; t < 120; ++t) {
      const int d = 1 + static_cast<int>(rng.below(2));
      const std::int64_t n = d == 1 ? 1 + static_cast<std::int64_t>(rng.below(5)) : 1 + static_cast<std::int64_t>(rng.below(2));
      const Cube cube(n, d);
      const double eps = 0.3 * rng.uniform();
      const double alpha = 0.3 + 0.69 * rng.uniform();
      const GoodnessParams params(eps, alpha, cube);
      const Pattern a = random_pattern(cube, rng);
      const bool slow = oracle::is_good_bruteforce(oracle::values_of(a), n, d, params.threshold(),
                                                   std::min(params.max_shift(), n));
      CHECK(is_good(a, params) == slow);
    }
  }

  TEST_CASE("good sets shrink as epsilon grows") {
    Rng rng(42);
    for (int t = 0; t < 100; ++t) {
      const Cube cube(4, 2);
      const Pattern a = random_pattern(cube, rng);
      bool was_good = true;
      for (int i = 0; i < 20; ++i) {
        const bool g = is_good(a, GoodnessParams(i / 20.0, 0.5, cube));
        if (!was_good) CHECK_FALSE(g);
        was_good = g;
      }
    }
  }

  TEST_CASE("goodness is invariant under complement and reflection") {
    Rng rng(43);
    for (int t = 0; t < 200; ++t) {
      const int d = 1 + static_cast<int>(rng.below(3));
      const Cube cube(d == 1 ? 12 : (d == 2 ? 5 : 3), d);
      const GoodnessParams params(0.1 * rng.uniform(), 0.5, cube);
      const Pattern a = random_pattern(cube, rng);
      const bool g = is_good(a, params);
      CHECK(is_good(a.complement(), params) == g);
      CHECK(is_good(reflect_first_axis(a), params) == g);
    }
  }

  TEST_CASE("exact enumeration is capped") {
    const GoodnessParams big(0.1, 0.4, Cube(4, 2));
    CHECK_THROWS_AS(goodness_fraction(FieldModel::bernoulli(0.5), big, 10, SeedSpec{1}, FractionMode::exact),
                    EstimationError);
    CHECK_THROWS_AS(goodness_fraction(FieldModel::ising(0.2, 0.0), GoodnessParams(0.1, 0.4, Cube(2, 2)), 10,
                                      SeedSpec{1}, FractionMode::exact),
                    UnsupportedModelError);
  }

  TEST_CASE("Monte Carlo fraction matches exact enumeration") {
    const GoodnessParams params(0.1, 0.5, Cube(3, 2));
    const Estimate exact =
        goodness_fraction(FieldModel::bernoulli(0.5), params, 10, SeedSpec{1}, FractionMode::exact);
    const Estimate mc =
        goodness_fraction(FieldModel::bernoulli(0.5), params, 20000, SeedSpec{44}, FractionMode::monte_carlo);
    CHECK(std::abs(mc.value - exact.value) < 4 * mc.std_error + 1e-9);
  }

  TEST_CASE("good patterns dominate as n grows in two dimensions") {
    const FieldModel q = FieldModel::bernoulli(0.5);
    const Estimate small = goodness_fraction(q, GoodnessParams(0.05, 0.5, Cube(2, 2)), 4000, SeedSpec{45});
    const Estimate large = goodness_fraction(q, GoodnessParams(0.05, 0.5, Cube(8, 2)), 4000, SeedSpec{45});
    const Estimate larger = goodness_fraction(q, GoodnessParams(0.05, 0.5, Cube(16, 2)), 4000, SeedSpec{45});
    CHECK(large.value > small.value);
    CHECK(larger.value > large.value);
    CHECK(larger.value > 0.99);
  }

  TEST_CASE("draw_good_pattern returns a good pattern") {
    const GoodnessParams params(0.05, 0.4, Cube(6, 1));
    const Pattern a = draw_good_pattern(FieldModel::bernoulli(0.5), params, SeedSpec{7});
    CHECK(is_good(a, params));
    CHECK_THROWS_AS(draw_good_pattern(FieldModel::bernoulli(0.0), params, SeedSpec{7}, 50), EstimationError);
  }

  TEST_CASE("box goodness") {
    BitGrid g(Extents::from_max(2, {3, 5, 0}));
    for_each_site(Box{{0, 0, 0}, g.extents()}, [&](const Point& x) { g.set(x, ((x[0] * 7 + x[1] * 3) % 5) < 2); });
    CHECK_FALSE(is_good_box(BitGrid(Extents::cube(2, 4)), 0.0, 0.4));
    CHECK_NOTHROW(is_good_box(g, 0.05, 0.4));
    CHECK(is_good_box(Pattern::checkerboard(Cube(3, 1)).grid(), 0.0, 0.4));
  }
}
