#pragma once

// Mismatch maps over all placements, approximate hitting times and waiting
// times.
//
// The hitting-time search visits the placements x in [0, k−n]^d new to C_k
// for k = n, n+1, ... and stops at the first k with a match. Internally it
// evaluates 64 horizontally adjacent placements at once: for every pattern
// cell the shifted field word is XORed with the cell value and added into a
// bit-sliced saturating counter, so one pass yields the "count <= E" mask of
// all 64 placements.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "apmatch/fields.hpp"
#include "apmatch/lattice.hpp"

namespace apm {

/// Per-placement mismatch counts Δ(C_n, θ_{−x}σ, A) for every x with C_n + x inside the window.
struct MismatchMap {
  Extents placements;  // x ranges over [0, placements.side)
  std::vector<std::int32_t> counts;  // site order over placements

  [[nodiscard]] std::int32_t at(const Point& x) const;
};

MismatchMap mismatch_map(const BitGrid& sigma, const Pattern& pattern);
MismatchMap mismatch_map(const FieldSample& sigma, const Pattern& pattern);

enum class HitOutcome { hit, censored };

struct HitResult {
  HitOutcome outcome = HitOutcome::censored;
  /// |C_k| = (k+1)^d of the first window containing a match; cap volume when censored.
  std::int64_t volume = 0;
  /// Witness placement: lexicographically first among those new to C_k.
  Point offset{0, 0, 0};
  /// L_max used for the search.
  std::int64_t cap = 0;
  int dim = 1;

  [[nodiscard]] bool hit() const noexcept { return outcome == HitOutcome::hit; }
  /// k such that volume = (k+1)^d; the cap when censored.
  [[nodiscard]] std::int64_t side_index() const noexcept;
};

/// Origin-anchored configuration that can be grown on demand.
class FieldSource {
 public:
  virtual ~FieldSource() = default;
  [[nodiscard]] virtual int dim() const = 0;
  /// Grid covering at least [0, side)^d.
  virtual const BitGrid& cover(std::int64_t side) = 0;
};

/// Wraps a fixed sample; cover() fails if the window is too small.
class SampleSource final : public FieldSource {
 public:
  explicit SampleSource(const BitGrid& grid) : grid_(&grid) {}
  [[nodiscard]] int dim() const override { return grid_->dim(); }
  const BitGrid& cover(std::int64_t side) override;

 private:
  const BitGrid* grid_;
};

/// Bernoulli(p) field generated lazily from the same counter-based stream as
/// sample_bernoulli, so the sites it reveals equal those of an eager sample.
class LazyBernoulliSource final : public FieldSource {
 public:
  LazyBernoulliSource(double p, int dim, const SeedSpec& seed, std::int64_t max_side);
  [[nodiscard]] int dim() const override { return dim_; }
  const BitGrid& cover(std::int64_t side) override;
  [[nodiscard]] std::int64_t generated_side() const noexcept { return side_; }

 private:
  double p_;
  int dim_;
  std::uint64_t key_;
  std::int64_t max_side_;
  std::int64_t side_ = 0;
  BitGrid grid_;
};

/// Source for one replica of a model: lazy for Bernoulli, a full [0, L_max]^d
/// Gibbs sample for Ising.
std::unique_ptr<FieldSource> make_source(const FieldModel& model, int dim, const SeedSpec& seed,
                                         std::int64_t l_max);

/// Compiled pattern for repeated searches with one threshold.
class PatternMatcher {
 public:
  PatternMatcher(const Pattern& pattern, std::int64_t threshold);

  [[nodiscard]] const Cube& cube() const noexcept { return cube_; }
  [[nodiscard]] std::int64_t threshold() const noexcept { return threshold_; }

  /// Match mask of the placements (lead, col0 + b) for b < lanes, lanes <= 64.
  /// Requires those placements to lie inside the grid.
  [[nodiscard]] std::uint64_t match_block(const BitGrid& grid, std::int64_t lead0, std::int64_t lead1,
                                          std::int64_t col0, int lanes) const;

  /// Approximate hitting time with search cap L_max.
  HitResult first_hit(FieldSource& source, std::int64_t l_max) const;

 private:
  struct Cell {
    std::int64_t lead0;
    std::int64_t lead1;
    std::int64_t col;
    std::uint64_t flip;  // all ones where the pattern holds 1
  };

  Cube cube_;
  std::int64_t threshold_;
  int planes_;
  std::vector<Cell> cells_;
  std::vector<std::size_t> row_ends_;
};

/// T_{[A]^ε}(σ) = min{|C_k| : k <= L_max, some x with C_n + x ⊆ C_k ε-matches}.
HitResult hitting_time(FieldSource& sigma, const Pattern& pattern, const DistortionSpec& spec,
                       std::int64_t l_max);
HitResult hitting_time(const FieldSample& sigma, const Pattern& pattern, const DistortionSpec& spec,
                       std::int64_t l_max);

/// W_n^ε(ω, σ) = T_{[ω_{C_n}]^ε}(σ).
HitResult waiting_time(const FieldSample& omega, FieldSource& sigma, std::int64_t n,
                       const DistortionSpec& spec, std::int64_t l_max);
HitResult waiting_time(const FieldSample& omega, const FieldSample& sigma, std::int64_t n,
                       const DistortionSpec& spec, std::int64_t l_max);

/// One comma-separated record: replica,outcome,volume,x_0[,x_1[,x_2]],seed.
std::string format_hit_record(std::uint64_t replica, const HitResult& hit, std::uint64_t seed);
std::string hit_record_header(int dim);

}  // namespace apm
