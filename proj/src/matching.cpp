#include "apmatch/matching.hpp"

#include <algorithm>
#include <array>
#include <bit>

#include "apmatch/errors.hpp"

namespace apm {

namespace {

std::int64_t ipow(std::int64_t base, int exp) {
  std::int64_t v = 1;
  for (int i = 0; i < exp; ++i) v *= base;
  return v;
}

std::uint64_t lane_mask(int lanes) {
  return lanes >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << lanes) - 1);
}

class OwnedSampleSource final : public FieldSource {
 public:
  explicit OwnedSampleSource(FieldSample sample) : sample_(std::move(sample)), inner_(sample_.grid()) {}
  [[nodiscard]] int dim() const override { return inner_.dim(); }
  const BitGrid& cover(std::int64_t side) override { return inner_.cover(side); }

 private:
  FieldSample sample_;
  SampleSource inner_;
};

}  // namespace

// ---------------------------------------------------------------- MismatchMap

std::int32_t MismatchMap::at(const Point& x) const {
  if (!placements.contains(x)) throw DomainError("placement outside the mismatch map");
  std::int64_t idx = 0;
  for (int i = 0; i < placements.dim; ++i) idx = idx * placements.side[i] + x[i];
  return counts[static_cast<std::size_t>(idx)];
}

MismatchMap mismatch_map(const BitGrid& sigma, const Pattern& pattern) {
  const Cube& cube = pattern.cube();
  const Extents& window = sigma.extents();
  if (window.dim != cube.dim()) throw DomainError("pattern and window dimensions differ");
  MismatchMap map;
  map.placements.dim = window.dim;
  for (int i = 0; i < window.dim; ++i) {
    map.placements.side[i] = window.side[i] - cube.n();
    if (map.placements.side[i] < 1) throw DomainError("window smaller than the pattern");
  }
  map.counts.reserve(static_cast<std::size_t>(map.placements.volume()));
  const Extents ext = cube.extents();
  for_each_site(Box{{0, 0, 0}, map.placements}, [&](const Point& x) {
    map.counts.push_back(
        static_cast<std::int32_t>(count_mismatches(pattern.grid(), {0, 0, 0}, sigma, x, ext)));
  });
  return map;
}

MismatchMap mismatch_map(const FieldSample& sigma, const Pattern& pattern) {
  return mismatch_map(sigma.grid(), pattern);
}

// ---------------------------------------------------------------- sources

std::int64_t HitResult::side_index() const noexcept {
  if (!hit()) return cap;
  // volume = (k+1)^d
  std::int64_t k = 0;
  while (ipow(k + 1, dim) < volume) ++k;
  return k;
}

const BitGrid& SampleSource::cover(std::int64_t side) {
  const Extents& e = grid_->extents();
  for (int i = 0; i < e.dim; ++i) {
    if (e.side[i] < side) {
      throw DomainError("sample window does not contain [0, " + std::to_string(side - 1) + "]^d");
    }
  }
  return *grid_;
}

LazyBernoulliSource::LazyBernoulliSource(double p, int dim, const SeedSpec& seed, std::int64_t max_side)
    : p_(p), dim_(dim), key_(bernoulli_stream_key(seed)), max_side_(max_side) {
  FieldModel::bernoulli(p);
  if (dim < 1 || dim > kMaxDim) throw ArgumentError("dimension must be 1, 2 or 3");
}

const BitGrid& LazyBernoulliSource::cover(std::int64_t side) {
  if (side <= side_) return grid_;
  if (side > max_side_) throw DomainError("lazy field asked beyond its cap");
  const std::int64_t grown = std::min(max_side_, std::max({side, 2 * side_, std::int64_t{128}}));
  BitGrid g(Extents::cube(dim_, grown));
  fill_bernoulli_rows(g, p_, key_);
  grid_ = std::move(g);
  side_ = grown;
  return grid_;
}

std::unique_ptr<FieldSource> make_source(const FieldModel& model, int dim, const SeedSpec& seed,
                                         std::int64_t l_max) {
  model.validate();
  if (model.kind == ModelKind::bernoulli) {
    return std::make_unique<LazyBernoulliSource>(model.p, dim, seed, l_max + 1);
  }
  return std::make_unique<OwnedSampleSource>(sample_field(model, Extents::cube(dim, l_max + 1), seed));
}

// ---------------------------------------------------------------- PatternMatcher

PatternMatcher::PatternMatcher(const Pattern& pattern, std::int64_t threshold)
    : cube_(pattern.cube()), threshold_(threshold) {
  if (threshold < 0) throw ArgumentError("negative threshold");
  planes_ = threshold >= cube_.sites() ? 0 : std::bit_width(static_cast<std::uint64_t>(threshold));
  const int d = cube_.dim();
  const std::int64_t len = cube_.n() + 1;
  for_each_site(Box{{0, 0, 0}, leading_extents(cube_.extents())}, [&](const Point& lead) {
    for (std::int64_t c = 0; c < len; ++c) {
      Point y = lead;
      if (d == 1) y = {0, 0, 0};
      y[d - 1] = c;
      const bool v = pattern.at(y);
      cells_.push_back(Cell{d == 1 ? 0 : lead[0], d == 3 ? lead[1] : 0, c, v ? ~std::uint64_t{0} : 0});
    }
    row_ends_.push_back(cells_.size());
  });
}

std::uint64_t PatternMatcher::match_block(const BitGrid& grid, std::int64_t lead0, std::int64_t lead1,
                                          std::int64_t col0, int lanes) const {
  const std::uint64_t valid = lane_mask(lanes);
  if (threshold_ >= cube_.sites()) return valid;
  std::array<std::uint64_t, 64> plane{};
  std::uint64_t over = 0;
  const std::uint64_t e = static_cast<std::uint64_t>(threshold_);
  std::size_t cell = 0;
  for (std::size_t row_end : row_ends_) {
    const Cell& first = cells_[cell];
    const std::int64_t r = grid.row_index(lead0 + first.lead0, lead1 + first.lead1);
    for (; cell < row_end; ++cell) {
      const Cell& c = cells_[cell];
      std::uint64_t carry = grid.load64(r, col0 + c.col) ^ c.flip;
      for (int i = 0; i < planes_ && carry; ++i) {
        const std::uint64_t t = plane[static_cast<std::size_t>(i)] & carry;
        plane[static_cast<std::size_t>(i)] ^= carry;
        carry = t;
      }
      over |= carry;
    }
    // lanes whose count already exceeds E
    std::uint64_t gt = 0;
    std::uint64_t eq = ~std::uint64_t{0};
    for (int i = planes_ - 1; i >= 0; --i) {
      const std::uint64_t bit = plane[static_cast<std::size_t>(i)];
      if ((e >> i) & 1U) {
        eq &= bit;
      } else {
        gt |= eq & bit;
        eq &= ~bit;
      }
    }
    const std::uint64_t fail = over | gt;
    if ((fail & valid) == valid) return 0;
    if (row_end == cells_.size()) return ~fail & valid;
  }
  return 0;
}

HitResult PatternMatcher::first_hit(FieldSource& source, std::int64_t l_max) const {
  const std::int64_t n = cube_.n();
  const int d = cube_.dim();
  if (source.dim() != d) throw ArgumentError("field and pattern dimensions differ");
  if (l_max < n) throw ArgumentError("L_max must be at least n");
  HitResult result;
  result.cap = l_max;
  result.dim = d;

  const std::int64_t last_shell = l_max - n;
  constexpr std::int64_t kBatch = 64;
  for (std::int64_t m0 = 0; m0 <= last_shell; m0 += kBatch) {
    const std::int64_t m1 = std::min(m0 + kBatch - 1, last_shell);
    const BitGrid& grid = source.cover(m1 + n + 1);

    std::int64_t best_m = -1;
    Point best{0, 0, 0};
    const std::int64_t lead_side0 = d >= 2 ? m1 + 1 : 1;
    const std::int64_t lead_side1 = d == 3 ? m1 + 1 : 1;
    for (std::int64_t a = 0; a < lead_side0; ++a) {
      for (std::int64_t b = 0; b < lead_side1; ++b) {
        const std::int64_t lead_max = d == 1 ? -1 : std::max(a, d == 3 ? b : 0);
        if (best_m >= 0 && lead_max >= best_m) continue;
        const std::int64_t lo = lead_max >= m0 ? 0 : m0;
        for (std::int64_t c0 = lo; c0 <= m1; c0 += 64) {
          const int lanes = static_cast<int>(std::min<std::int64_t>(64, m1 - c0 + 1));
          const std::uint64_t mask = match_block(grid, a, b, c0, lanes);
          if (mask == 0) continue;
          const std::int64_t col = c0 + std::countr_zero(mask);
          const std::int64_t m = std::max(lead_max, col);
          if (best_m < 0 || m < best_m) {
            best_m = m;
            best = d == 1 ? Point{col, 0, 0} : (d == 2 ? Point{a, col, 0} : Point{a, b, col});
          }
          break;
        }
        if (best_m == m0) break;
      }
      if (best_m == m0) break;
    }
    if (best_m >= 0) {
      result.outcome = HitOutcome::hit;
      result.volume = ipow(n + best_m + 1, d);
      result.offset = best;
      return result;
    }
  }
  result.outcome = HitOutcome::censored;
  result.volume = ipow(l_max + 1, d);
  return result;
}

// ---------------------------------------------------------------- public API

HitResult hitting_time(FieldSource& sigma, const Pattern& pattern, const DistortionSpec& spec,
                       std::int64_t l_max) {
  if (l_max < pattern.cube().n()) throw ArgumentError("L_max must be at least n");
  return PatternMatcher(pattern, spec.threshold(pattern.cube())).first_hit(sigma, l_max);
}

HitResult hitting_time(const FieldSample& sigma, const Pattern& pattern, const DistortionSpec& spec,
                       std::int64_t l_max) {
  SampleSource source(sigma.grid());
  return hitting_time(source, pattern, spec, l_max);
}

HitResult waiting_time(const FieldSample& omega, FieldSource& sigma, std::int64_t n,
                       const DistortionSpec& spec, std::int64_t l_max) {
  const Pattern pattern = omega.extract(Cube(n, omega.window().dim));
  return hitting_time(sigma, pattern, spec, l_max);
}

HitResult waiting_time(const FieldSample& omega, const FieldSample& sigma, std::int64_t n,
                       const DistortionSpec& spec, std::int64_t l_max) {
  SampleSource source(sigma.grid());
  return waiting_time(omega, source, n, spec, l_max);
}

std::string hit_record_header(int dim) {
  std::string h = "replica,outcome,volume";
  for (int i = 0; i < dim; ++i) h += ",x" + std::to_string(i);
  return h + ",seed";
}

std::string format_hit_record(std::uint64_t replica, const HitResult& hit, std::uint64_t seed) {
  std::string s = std::to_string(replica) + (hit.hit() ? ",hit," : ",censored,") + std::to_string(hit.volume);
  for (int i = 0; i < hit.dim; ++i) s += "," + (hit.hit() ? std::to_string(hit.offset[i]) : std::string{});
  return s + "," + std::to_string(seed);
}

}  // namespace apm
