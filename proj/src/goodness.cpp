#include "apmatch/goodness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "apmatch/errors.hpp"
#include "apmatch/parallel.hpp"

namespace apm {

GoodnessParams::GoodnessParams(double epsilon_, double alpha_, const Cube& cube_)
    : epsilon(epsilon_), alpha(alpha_), cube(cube_) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ArgumentError("goodness epsilon must lie in [0,1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0,1)");
}

std::int64_t GoodnessParams::max_shift() const {
  return static_cast<std::int64_t>(std::floor(alpha * static_cast<double>(cube.n()) + 1e-9));
}

std::int64_t GoodnessParams::threshold() const { return ball_threshold(epsilon, cube); }

const ShiftDisagreement& DisagreementProfile::at(const Point& shift) const {
  for (const auto& e : entries) {
    if (e.shift == shift) return e;
  }
  throw DomainError("shift not in the disagreement profile");
}

ShiftDisagreement shift_disagreement(const BitGrid& values, const Point& shift) {
  const Extents& e = values.extents();
  ShiftDisagreement out;
  out.shift = shift;
  Extents overlap;
  overlap.dim = e.dim;
  Point lo{0, 0, 0};
  Point src{0, 0, 0};
  for (int i = 0; i < e.dim; ++i) {
    overlap.side[i] = e.side[i] - std::abs(shift[i]);
    if (overlap.side[i] <= 0) return out;
    lo[i] = std::max<std::int64_t>(0, shift[i]);
    src[i] = lo[i] - shift[i];
  }
  out.overlap = overlap.volume();
  out.disagreement = count_mismatches(values, lo, values, src, overlap);
  return out;
}

namespace {

template <typename Fn>
void for_each_shift(int dim, std::int64_t max_shift, Fn&& fn) {
  if (max_shift < 1) return;
  Extents e = Extents::cube(dim, 2 * max_shift + 1);
  Point lo{0, 0, 0};
  for (int i = 0; i < dim; ++i) lo[i] = -max_shift;
  for_each_site(Box{lo, e}, [&](const Point& x) {
    if (x == Point{0, 0, 0}) return;
    fn(x);
  });
}

bool good_with(const BitGrid& values, std::int64_t max_shift, std::int64_t threshold) {
  bool good = true;
  for_each_shift(values.dim(), max_shift, [&](const Point& x) {
    if (!good) return;
    if (shift_disagreement(values, x).disagreement <= 2 * threshold) good = false;
  });
  return good;
}

}  // namespace

DisagreementProfile disagreement_profile(const Pattern& pattern, std::int64_t max_shift) {
  if (max_shift < 0 || max_shift > pattern.cube().n()) {
    throw ArgumentError("max_shift must lie in [0, n]");
  }
  DisagreementProfile profile;
  profile.dim = pattern.cube().dim();
  profile.max_shift = max_shift;
  for_each_shift(profile.dim, max_shift,
                 [&](const Point& x) { profile.entries.push_back(shift_disagreement(pattern.grid(), x)); });
  return profile;
}

bool is_good(const Pattern& pattern, const GoodnessParams& params) {
  if (!(pattern.cube() == params.cube)) throw ArgumentError("pattern cube differs from params cube");
  return good_with(pattern.grid(), std::min(params.max_shift(), params.cube.n()), params.threshold());
}

bool is_good_box(const BitGrid& values, double epsilon, double alpha) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ArgumentError("goodness epsilon must lie in [0,1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0,1)");
  const Extents& e = values.extents();
  std::int64_t longest = 0;
  for (int i = 0; i < e.dim; ++i) longest = std::max(longest, e.side[i] - 1);
  const auto max_shift = static_cast<std::int64_t>(std::floor(alpha * static_cast<double>(longest) + 1e-9));
  return good_with(values, max_shift, ball_threshold_for_sites(epsilon, e.volume()));
}

Pattern pattern_from_index(const Cube& cube, std::uint64_t index) {
  Pattern p(cube);
  BitGrid g(cube.extents());
  std::int64_t i = 0;
  for_each_site(cube.at({0, 0, 0}), [&](const Point& y) {
    if ((index >> i) & 1U) g.set(y, true);
    ++i;
  });
  return Pattern(cube, std::move(g));
}

Estimate goodness_fraction(const FieldModel& q_model, const GoodnessParams& params,
                           std::int64_t replicas, const SeedSpec& seed, FractionMode mode) {
  q_model.validate();
  const std::int64_t sites = params.cube.sites();
  if (mode == FractionMode::automatic) {
    mode = (q_model.is_product() && sites <= 16) ? FractionMode::exact : FractionMode::monte_carlo;
  }
  if (mode == FractionMode::exact) {
    if (!q_model.is_product()) throw UnsupportedModelError("exact goodness fraction needs a product law Q");
    if (sites > kExactEnumerationCap) {
      throw EstimationError("exact enumeration refused: |C_n| = " + std::to_string(sites) + " exceeds " +
                            std::to_string(kExactEnumerationCap));
    }
    if (params.vacuous()) return Estimate::exact(1.0);
    const std::uint64_t total = std::uint64_t{1} << sites;
    constexpr std::uint64_t kChunk = 4096;
    const std::int64_t chunks = static_cast<std::int64_t>((total + kChunk - 1) / kChunk);
    std::vector<double> partial(static_cast<std::size_t>(chunks), 0.0);
    const double p = q_model.p;
    parallel_for(chunks, [&](std::int64_t c) {
      double acc = 0.0;
      const std::uint64_t end = std::min(total, (static_cast<std::uint64_t>(c) + 1) * kChunk);
      for (std::uint64_t idx = static_cast<std::uint64_t>(c) * kChunk; idx < end; ++idx) {
        const Pattern a = pattern_from_index(params.cube, idx);
        if (!is_good(a, params)) continue;
        const int ones = std::popcount(idx);
        acc += std::pow(p, ones) * std::pow(1.0 - p, static_cast<double>(sites - ones));
      }
      partial[static_cast<std::size_t>(c)] = acc;
    });
    double sum = 0.0;
    for (double v : partial) sum += v;
    return Estimate::exact(sum);
  }
  if (replicas < 1) throw ArgumentError("replicas must be at least 1");
  std::vector<std::uint8_t> good(static_cast<std::size_t>(replicas), 0);
  parallel_for(replicas, [&](std::int64_t r) {
    const Pattern a = sample_pattern(q_model, params.cube, seed.with_replica(static_cast<std::uint64_t>(r)));
    good[static_cast<std::size_t>(r)] = is_good(a, params) ? 1 : 0;
  });
  std::int64_t count = 0;
  for (auto g : good) count += g;
  const double f = static_cast<double>(count) / static_cast<double>(replicas);
  return Estimate::monte_carlo(f, std::sqrt(f * (1.0 - f) / static_cast<double>(replicas)), replicas, seed);
}

Pattern draw_good_pattern(const FieldModel& q_model, const GoodnessParams& params, const SeedSpec& seed,
                          std::int64_t max_tries) {
  for (std::int64_t r = 0; r < max_tries; ++r) {
    Pattern a = sample_pattern(q_model, params.cube, seed.with_replica(static_cast<std::uint64_t>(r)));
    if (is_good(a, params)) return a;
  }
  throw EstimationError("no good pattern found in " + std::to_string(max_tries) + " draws");
}

}  // namespace apm
