#include <doctest.h>

#include <sstream>

#include "apmatch/errors.hpp"
#include "apmatch/fields.hpp"
#include "apmatch/lattice.hpp"
#include "oracles.hpp"

using namespace apm;

namespace {

BitGrid random_grid(const Extents& e, Rng& rng) {
  BitGrid g(e);
  for_each_site(Box{{0, 0, 0}, e}, [&](const Point& x) { g.set(x, rng.bernoulli(0.5)); });
  return g;
}

std::int64_t naive_delta(const BitGrid& a, const Point& a_lo, const BitGrid& b, const Point& b_lo,
                         const Extents& e) {
  std::int64_t k = 0;
  for_each_site(Box{{0, 0, 0}, e}, [&](const Point& y) {
    Point pa = y;
    Point pb = y;
    for (int i = 0; i < e.dim; ++i) {
      pa[i] += a_lo[i];
      pb[i] += b_lo[i];
    }
    k += a.get(pa) != b.get(pb);
  });
  return k;
}

}  // namespace

TEST_SUITE("lattice") {
  TEST_CASE("cube site count and order") {
    CHECK(Cube(2, 2).sites() == 9);
    CHECK(Cube(0, 3).sites() == 1);
    CHECK(Cube(4, 1).sites() == 5);
    std::vector<Point> seen;
    for_each_site(Cube(1, 2).at({0, 0, 0}), [&](const Point& p) { seen.push_back(p); });
    REQUIRE(seen.size() == 4);
    CHECK(seen[0] == Point{0, 0, 0});
    CHECK(seen[1] == Point{0, 1, 0});
    CHECK(seen[2] == Point{1, 0, 0});
    CHECK(seen[3] == Point{1, 1, 0});
    CHECK_THROWS_AS(Cube(1, 4), ArgumentError);
    CHECK_THROWS_AS(Cube(-1, 1), ArgumentError);
  }

  TEST_CASE("hamming_delta examples") {
    const Cube c1(1, 2);
    const Box v = c1.at({0, 0, 0});
    const Pattern ones = Pattern::constant(c1, true);
    const Pattern zeros = Pattern::constant(c1, false);
    CHECK(hamming_delta(v, ones.grid(), ones.grid()) == 0);
    CHECK(hamming_delta(v, ones.grid(), zeros.grid()) == 4);
    const Cube c2(2, 2);
    CHECK(hamming_delta(c2.at({0, 0, 0}), Pattern::checkerboard(c2).grid(), Pattern::constant(c2, false).grid()) == 4);
    CHECK_THROWS_AS(hamming_delta(c2.at({0, 0, 0}), ones.grid(), zeros.grid()), DomainError);
  }

  TEST_CASE("ball_threshold examples") {
    CHECK(ball_threshold(0.0, Cube(5, 2)) == 0);
    CHECK(ball_threshold(0.2, Cube(2, 2)) == 1);
    CHECK(ball_threshold(1.0, Cube(2, 2)) == 9);
    CHECK(ball_threshold_for_sites(0.29, 100) == 29);
    CHECK_THROWS_AS(ball_threshold(1.5, Cube(2, 2)), ArgumentError);
    CHECK_THROWS_AS(ball_threshold(-0.1, Cube(2, 2)), ArgumentError);
    std::int64_t prev = 0;
    for (int i = 0; i <= 100; ++i) {
      const auto e = ball_threshold(i / 100.0, Cube(4, 2));
      CHECK(e >= prev);
      prev = e;
    }
  }

  TEST_CASE("epsilon_match examples") {
    const Cube c(2, 2);
    const Pattern a = Pattern::checkerboard(c);
    BitGrid window(Extents::cube(2, 5));
    for_each_site(Box{{1, 1, 0}, c.extents()}, [&](const Point& x) { window.set(x, a.at({x[0] - 1, x[1] - 1, 0})); });
    const FieldSample sample(window, Provenance{});
    CHECK(epsilon_match(a, sample, {1, 1, 0}, DistortionSpec(0.0)));
    window.set({1, 1, 0}, !window.get({1, 1, 0}));
    const FieldSample one_off(window, Provenance{});
    CHECK(epsilon_match(a, one_off, {1, 1, 0}, DistortionSpec(0.2)));
    window.set({2, 3, 0}, !window.get({2, 3, 0}));
    const FieldSample two_off(window, Provenance{});
    CHECK_FALSE(epsilon_match(a, two_off, {1, 1, 0}, DistortionSpec(0.2)));
    CHECK_THROWS_AS(epsilon_match(a, sample, {3, 3, 0}, DistortionSpec(0.2)), DomainError);
  }

  TEST_CASE("hamming_delta symmetry and triangle inequality") {
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
      const int d = 1 + static_cast<int>(rng.below(3));
      const Extents e = Extents::cube(d, 1 + static_cast<std::int64_t>(rng.below(d == 1 ? 150 : 9)));
      const BitGrid a = random_grid(e, rng);
      const BitGrid b = random_grid(e, rng);
      const BitGrid c = random_grid(e, rng);
      const Box v{{0, 0, 0}, e};
      CHECK(hamming_delta(v, a, b) == hamming_delta(v, b, a));
      CHECK(hamming_delta(v, a, b) <= hamming_delta(v, a, c) + hamming_delta(v, c, b));
      CHECK(hamming_delta(v, a, b) <= e.volume());
    }
  }

  TEST_CASE("packed mismatch count equals a site loop") {
    Rng rng(12);
    for (int t = 0; t < 1000; ++t) {
      const int d = 1 + static_cast<int>(rng.below(3));
      const std::int64_t n = static_cast<std::int64_t>(rng.below(d == 1 ? 140 : (d == 2 ? 12 : 5)));
      const Cube cube(n, d);
      const Pattern a(cube, random_grid(cube.extents(), rng));
      Extents window;
      window.dim = d;
      Point off{0, 0, 0};
      for (int i = 0; i < d; ++i) {
        window.side[i] = n + 1 + static_cast<std::int64_t>(rng.below(d == 1 ? 200 : 20));
        off[i] = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(window.side[i] - n)));
      }
      const BitGrid sigma = random_grid(window, rng);
      CHECK(count_mismatches(a.grid(), {0, 0, 0}, sigma, off, cube.extents()) ==
            naive_delta(a.grid(), {0, 0, 0}, sigma, off, cube.extents()));
    }
  }

  TEST_CASE("ball cardinality matches the binomial sum") {
    Rng rng(13);
    for (std::int64_t n = 0; n <= 15; ++n) {
      const Cube cube(n, 1);
      const Pattern a(cube, random_grid(cube.extents(), rng));
      const oracle::Values av = oracle::values_of(a);
      for (double eps : {0.0, 0.1, 0.25, 0.5}) {
        const std::int64_t e = ball_threshold(eps, cube);
        std::int64_t inside = 0;
        const auto sites = static_cast<int>(cube.sites());
        for (std::uint64_t s = 0; s < (std::uint64_t{1} << sites); ++s) {
          oracle::Values v(static_cast<std::size_t>(sites));
          for (int i = 0; i < sites; ++i) v[static_cast<std::size_t>(i)] = static_cast<int>((s >> i) & 1U);
          inside += oracle::mismatches(av, v) <= e;
        }
        std::int64_t binom = 0;
        std::int64_t term = 1;
        for (std::int64_t k = 0; k <= e; ++k) {
          binom += term;
          term = term * (sites - k) / (k + 1);
        }
        CHECK(inside == binom);
      }
    }
  }

  TEST_CASE("epsilon_match is monotone in epsilon") {
    Rng rng(14);
    for (int t = 0; t < 100; ++t) {
      const Cube cube(3, 2);
      const Pattern a(cube, random_grid(cube.extents(), rng));
      const BitGrid sigma = random_grid(Extents::cube(2, 8), rng);
      const Point off{static_cast<std::int64_t>(rng.below(5)), static_cast<std::int64_t>(rng.below(5)), 0};
      bool matched = false;
      for (int i = 0; i <= 20; ++i) {
        const bool m = epsilon_match(a, sigma, off, ball_threshold(i / 20.0, cube));
        if (matched) CHECK(m);
        matched = matched || m;
      }
      CHECK(matched);
    }
  }

  TEST_CASE("pattern equality, complement and values") {
    const Cube cube(2, 2);
    const Pattern a = Pattern::checkerboard(cube);
    CHECK(a == Pattern::checkerboard(cube));
    CHECK_FALSE(a == a.complement());
    CHECK(a.complement().complement() == a);
    const auto v = a.values();
    CHECK(v == std::vector<std::uint8_t>{0, 1, 0, 1, 0, 1, 0, 1, 0});
    CHECK(Pattern::from_values(cube, v) == a);
    const std::vector<std::uint8_t> short_values{0, 1};
    CHECK_THROWS_AS(Pattern::from_values(cube, short_values), ArgumentError);
  }

  TEST_CASE("text round trip") {
    const Cube cube(3, 2);
    const Pattern a = Pattern::checkerboard(cube);
    std::stringstream s;
    write_text(s, a);
    CHECK(s.str() == "2 3\n0101\n1010\n0101\n1010\n");
    CHECK(read_pattern(s) == a);

    const FieldSample sample = sample_bernoulli(0.5, Extents::from_max(2, {4, 6, 0}), SeedSpec{7, 3});
    std::stringstream f;
    write_text(f, sample);
    const FieldSample back = read_field_sample(f);
    CHECK(back.grid() == sample.grid());
    CHECK(back.provenance() == sample.provenance());

    std::stringstream bad("2 1\n01\n2x\n");
    CHECK_THROWS_AS(read_pattern(bad), ArgumentError);
  }

  TEST_CASE("extract requires the cube inside the window") {
    const FieldSample sample = sample_bernoulli(0.3, Extents::cube(2, 6), SeedSpec{1, 0});
    const Pattern p = sample.extract(Cube(2, 2), {3, 3, 0});
    for_each_site(Cube(2, 2).at({0, 0, 0}), [&](const Point& y) { CHECK(p.at(y) == sample.at({y[0] + 3, y[1] + 3, 0})); });
    CHECK_THROWS_AS((void)sample.extract(Cube(2, 2), {4, 0, 0}), DomainError);
  }
}
