#pragma once

// Lattice geometry, bit-packed binary configurations and Hamming arithmetic.
//
// Site order everywhere is row-major lexicographic with the last coordinate
// fastest. A "row" is the run of sites sharing all leading coordinates; each
// row is packed into 64-bit words, bit j of the row holding the site whose
// last coordinate is j. Bits past the end of a row are kept zero.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace apm {

inline constexpr int kMaxDim = 3;

/// Lattice point; coordinates beyond the active dimension are zero.
using Point = std::array<std::int64_t, kMaxDim>;

/// Site counts per axis of a box [0, side_0) x ... x [0, side_{d-1}).
struct Extents {
  int dim = 1;
  Point side{1, 1, 1};

  static Extents cube(int dim, std::int64_t side);
  /// Box [0, max_0] x ... x [0, max_{d-1}] given by its largest coordinates.
  static Extents from_max(int dim, const Point& max_coord);

  [[nodiscard]] std::int64_t volume() const noexcept;
  [[nodiscard]] std::int64_t row_count() const noexcept;
  [[nodiscard]] std::int64_t row_length() const noexcept { return side[dim - 1]; }
  [[nodiscard]] bool contains(const Point& p) const noexcept;
  friend bool operator==(const Extents&, const Extents&) = default;
};

/// Box spanned by the leading (non-row) axes; a single point when dim == 1.
Extents leading_extents(const Extents& e);

/// A translated box of sites, lo + [0, extents).
struct Box {
  Point lo{0, 0, 0};
  Extents extents;
};

/// The n-cube C_n = [0,n]^d.
class Cube {
 public:
  Cube(std::int64_t n, int dim);

  [[nodiscard]] std::int64_t n() const noexcept { return n_; }
  [[nodiscard]] int dim() const noexcept { return dim_; }
  /// |C_n| = (n+1)^d.
  [[nodiscard]] std::int64_t sites() const noexcept;
  [[nodiscard]] Extents extents() const { return Extents::cube(dim_, n_ + 1); }
  [[nodiscard]] Box at(const Point& offset) const { return Box{offset, extents()}; }
  friend bool operator==(const Cube&, const Cube&) = default;

 private:
  std::int64_t n_;
  int dim_;
};

/// Bit-packed {0,1} values on a box anchored at the origin.
class BitGrid {
 public:
  BitGrid() = default;
  explicit BitGrid(const Extents& extents);

  [[nodiscard]] const Extents& extents() const noexcept { return extents_; }
  [[nodiscard]] int dim() const noexcept { return extents_.dim; }
  [[nodiscard]] std::int64_t words_per_row() const noexcept { return words_per_row_; }

  [[nodiscard]] bool get(const Point& p) const;
  void set(const Point& p, bool value);
  /// Row holding the leading coordinates of p.
  [[nodiscard]] std::int64_t row_of(const Point& p) const noexcept;
  /// Row index from leading coordinates (x_0, ..., x_{d-2}).
  [[nodiscard]] std::int64_t row_index(std::int64_t lead0, std::int64_t lead1) const noexcept;

  [[nodiscard]] std::span<const std::uint64_t> row(std::int64_t r) const noexcept;
  [[nodiscard]] std::span<std::uint64_t> row(std::int64_t r) noexcept;

  /// 64 row bits starting at column col < row_length(); bits past the row end read as 0.
  [[nodiscard]] std::uint64_t load64(std::int64_t r, std::int64_t col) const noexcept {
    const std::uint64_t* w = words_.data() + r * words_per_row_ + (col >> 6);
    const unsigned shift = static_cast<unsigned>(col & 63);
    if (shift == 0) return w[0];
    return (w[0] >> shift) | (w[1] << (64 - shift));
  }

  [[nodiscard]] std::int64_t count_ones() const noexcept;
  /// Clears padding bits past each row end.
  void normalize() noexcept;
  void fill(bool value);

  friend bool operator==(const BitGrid&, const BitGrid&) = default;

 private:
  Extents extents_;
  std::int64_t words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Calls fn(point) for every point of the box lo + [0, extents) in site order.
template <typename Fn>
void for_each_site(const Box& box, Fn&& fn) {
  const Extents& e = box.extents;
  Point p = box.lo;
  const int d = e.dim;
  if (e.volume() == 0) return;
  while (true) {
    fn(static_cast<const Point&>(p));
    int axis = d - 1;
    while (axis >= 0) {
      if (++p[axis] < box.lo[axis] + e.side[axis]) break;
      p[axis] = box.lo[axis];
      --axis;
    }
    if (axis < 0) return;
  }
}

/// An n-pattern: values on C_n.
class Pattern {
 public:
  Pattern(const Cube& cube, BitGrid bits);
  explicit Pattern(const Cube& cube);  // all zeros

  static Pattern constant(const Cube& cube, bool value);
  /// value(y) = (y_0 + ... + y_{d-1}) mod 2.
  static Pattern checkerboard(const Cube& cube);
  /// Values listed in site order.
  static Pattern from_values(const Cube& cube, std::span<const std::uint8_t> values);

  [[nodiscard]] const Cube& cube() const noexcept { return cube_; }
  [[nodiscard]] const BitGrid& grid() const noexcept { return bits_; }
  [[nodiscard]] bool at(const Point& y) const { return bits_.get(y); }
  [[nodiscard]] std::vector<std::uint8_t> values() const;
  [[nodiscard]] Pattern complement() const;

  friend bool operator==(const Pattern&, const Pattern&) = default;

 private:
  Cube cube_;
  BitGrid bits_;
};

/// Origin of a sampled configuration.
struct Provenance {
  std::string model;        // e.g. "bernoulli(p=0.5)"
  std::uint64_t seed = 0;   // master seed
  std::uint64_t replica = 0;
  std::string generator;
  std::int64_t sweeps = 0;  // Gibbs sweeps, 0 for product measures
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Binary values on a rectangular window [0,L_1] x ... x [0,L_d].
class FieldSample {
 public:
  FieldSample() = default;
  FieldSample(BitGrid bits, Provenance provenance);

  [[nodiscard]] const BitGrid& grid() const noexcept { return bits_; }
  [[nodiscard]] const Extents& window() const noexcept { return bits_.extents(); }
  [[nodiscard]] const Provenance& provenance() const noexcept { return provenance_; }
  [[nodiscard]] bool at(const Point& x) const { return bits_.get(x); }

  /// Pattern on C_n + offset, re-anchored at the origin.
  [[nodiscard]] Pattern extract(const Cube& cube, const Point& offset = {0, 0, 0}) const;

  friend bool operator==(const FieldSample&, const FieldSample&) = default;

 private:
  BitGrid bits_;
  Provenance provenance_;
};

/// Distortion level ε together with its per-cube integer threshold.
class DistortionSpec {
 public:
  explicit DistortionSpec(double epsilon);
  [[nodiscard]] double epsilon() const noexcept { return epsilon_; }
  /// E = floor(ε |C_n|).
  [[nodiscard]] std::int64_t threshold(const Cube& cube) const;
  [[nodiscard]] std::int64_t threshold_for_sites(std::int64_t sites) const;

 private:
  double epsilon_;
};

/// E = floor(ε (n+1)^d). A mismatch count k lies within distortion iff k <= E.
///
/// The product is floored with a 1e-9 slack so that decimal inputs such as
/// ε = 0.29, |C| = 100 give 29 rather than 28 from binary rounding.
std::int64_t ball_threshold(double epsilon, const Cube& cube);
std::int64_t ball_threshold_for_sites(double epsilon, std::int64_t sites);

/// Mismatches between a on a_lo + [0,extents) and b on b_lo + [0,extents).
/// Both boxes must lie inside their grids (unchecked).
std::int64_t count_mismatches(const BitGrid& a, const Point& a_lo, const BitGrid& b,
                              const Point& b_lo, const Extents& extents);

/// Δ(V, η, σ) = Σ_{x∈V} |η_x − σ_x| for grids sharing one coordinate frame.
std::int64_t hamming_delta(const Box& v, const BitGrid& eta, const BitGrid& sigma);

/// True iff Δ(C_n, θ_{−x}σ, A) <= E, i.e. σ shifted back by x lies in [A]^ε.
bool epsilon_match(const Pattern& pattern, const FieldSample& sigma, const Point& offset,
                   const DistortionSpec& spec);
bool epsilon_match(const Pattern& pattern, const BitGrid& sigma, const Point& offset,
                   std::int64_t threshold);

// Plain-text format: optional '#' comment lines (provenance as key=value
// tokens), then a header line, then one line of '0'/'1' per lattice row in
// row order. The pattern header is "d n"; the field header is
// "d L_1 ... L_d" with L_i the largest coordinate on axis i.
void write_text(std::ostream& out, const Pattern& pattern);
void write_text(std::ostream& out, const FieldSample& sample);
Pattern read_pattern(std::istream& in);
FieldSample read_field_sample(std::istream& in);

std::string to_string(const Pattern& pattern);
std::string to_string(const FieldSample& sample);

}  // namespace apm
