#include "apmatch/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "apmatch/errors.hpp"

namespace apm {

namespace {

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw ArgumentError("dimension must be 1, 2 or 3, got " + std::to_string(dim));
  }
}

std::uint64_t low_mask(std::int64_t bits) {
  return bits >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << bits) - 1);
}

bool box_inside(const Box& box, const Extents& domain) {
  if (box.extents.dim != domain.dim) return false;
  for (int i = 0; i < domain.dim; ++i) {
    if (box.lo[i] < 0 || box.lo[i] + box.extents.side[i] > domain.side[i]) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------- Extents

Extents Extents::cube(int dim, std::int64_t side) {
  check_dim(dim);
  if (side < 0) throw ArgumentError("negative side length");
  Extents e;
  e.dim = dim;
  for (int i = 0; i < dim; ++i) e.side[i] = side;
  return e;
}

Extents Extents::from_max(int dim, const Point& max_coord) {
  check_dim(dim);
  Extents e;
  e.dim = dim;
  for (int i = 0; i < dim; ++i) {
    if (max_coord[i] < 0) throw ArgumentError("window extent must be nonnegative");
    e.side[i] = max_coord[i] + 1;
  }
  return e;
}

std::int64_t Extents::volume() const noexcept {
  std::int64_t v = 1;
  for (int i = 0; i < dim; ++i) v *= side[i];
  return v;
}

std::int64_t Extents::row_count() const noexcept {
  std::int64_t r = 1;
  for (int i = 0; i + 1 < dim; ++i) r *= side[i];
  return r;
}

Extents leading_extents(const Extents& e) {
  Extents lead;
  lead.dim = e.dim == 1 ? 1 : e.dim - 1;
  for (int i = 0; i + 1 < e.dim; ++i) lead.side[i] = e.side[i];
  return lead;
}

bool Extents::contains(const Point& p) const noexcept {
  for (int i = 0; i < dim; ++i) {
    if (p[i] < 0 || p[i] >= side[i]) return false;
  }
  return true;
}

// ---------------------------------------------------------------- Cube

Cube::Cube(std::int64_t n, int dim) : n_(n), dim_(dim) {
  check_dim(dim);
  if (n < 0) throw ArgumentError("cube side index must be nonnegative");
}

std::int64_t Cube::sites() const noexcept {
  std::int64_t v = 1;
  for (int i = 0; i < dim_; ++i) v *= n_ + 1;
  return v;
}

// ---------------------------------------------------------------- BitGrid

BitGrid::BitGrid(const Extents& extents)
    : extents_(extents),
      words_per_row_((extents.row_length() + 63) / 64 + 1),
      words_(static_cast<std::size_t>(extents.row_count() * words_per_row_), 0) {
  check_dim(extents.dim);
}

std::int64_t BitGrid::row_index(std::int64_t lead0, std::int64_t lead1) const noexcept {
  switch (extents_.dim) {
    case 1:
      return 0;
    case 2:
      return lead0;
    default:
      return lead0 * extents_.side[1] + lead1;
  }
}

std::int64_t BitGrid::row_of(const Point& p) const noexcept { return row_index(p[0], p[1]); }

bool BitGrid::get(const Point& p) const {
  if (!extents_.contains(p)) throw DomainError("site outside grid");
  const std::int64_t col = p[extents_.dim - 1];
  const std::uint64_t w = words_[row_of(p) * words_per_row_ + (col >> 6)];
  return (w >> (col & 63)) & 1U;
}

void BitGrid::set(const Point& p, bool value) {
  if (!extents_.contains(p)) throw DomainError("site outside grid");
  const std::int64_t col = p[extents_.dim - 1];
  std::uint64_t& w = words_[row_of(p) * words_per_row_ + (col >> 6)];
  const std::uint64_t bit = std::uint64_t{1} << (col & 63);
  w = value ? (w | bit) : (w & ~bit);
}

std::span<const std::uint64_t> BitGrid::row(std::int64_t r) const noexcept {
  return {words_.data() + r * words_per_row_, static_cast<std::size_t>(words_per_row_)};
}

std::span<std::uint64_t> BitGrid::row(std::int64_t r) noexcept {
  return {words_.data() + r * words_per_row_, static_cast<std::size_t>(words_per_row_)};
}

std::int64_t BitGrid::count_ones() const noexcept {
  std::int64_t c = 0;
  for (std::uint64_t w : words_) c += std::popcount(w);
  return c;
}

void BitGrid::normalize() noexcept {
  const std::int64_t len = extents_.row_length();
  const std::int64_t full = len / 64;
  const std::int64_t rem = len % 64;
  for (std::int64_t r = 0; r < extents_.row_count(); ++r) {
    auto words = row(r);
    std::int64_t w = full;
    if (rem != 0) {
      words[w] &= low_mask(rem);
      ++w;
    }
    for (; w < words_per_row_; ++w) words[w] = 0;
  }
}

void BitGrid::fill(bool value) {
  std::fill(words_.begin(), words_.end(), value ? ~std::uint64_t{0} : 0);
  if (value) normalize();
}

// ---------------------------------------------------------------- Pattern

Pattern::Pattern(const Cube& cube, BitGrid bits) : cube_(cube), bits_(std::move(bits)) {
  if (!(bits_.extents() == cube.extents())) {
    throw ArgumentError("pattern values do not cover the cube");
  }
}

Pattern::Pattern(const Cube& cube) : cube_(cube), bits_(cube.extents()) {}

Pattern Pattern::constant(const Cube& cube, bool value) {
  Pattern p(cube);
  p.bits_.fill(value);
  return p;
}

Pattern Pattern::checkerboard(const Cube& cube) {
  Pattern p(cube);
  for_each_site(cube.at({0, 0, 0}), [&](const Point& y) {
    p.bits_.set(y, ((y[0] + y[1] + y[2]) & 1) != 0);
  });
  return p;
}

Pattern Pattern::from_values(const Cube& cube, std::span<const std::uint8_t> values) {
  if (static_cast<std::int64_t>(values.size()) != cube.sites()) {
    throw ArgumentError("expected " + std::to_string(cube.sites()) + " values, got " +
                        std::to_string(values.size()));
  }
  Pattern p(cube);
  std::size_t i = 0;
  for_each_site(cube.at({0, 0, 0}), [&](const Point& y) {
    const std::uint8_t v = values[i++];
    if (v > 1) throw ArgumentError("pattern values must be 0 or 1");
    p.bits_.set(y, v != 0);
  });
  return p;
}

std::vector<std::uint8_t> Pattern::values() const {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(cube_.sites()));
  for_each_site(cube_.at({0, 0, 0}), [&](const Point& y) { out.push_back(bits_.get(y)); });
  return out;
}

Pattern Pattern::complement() const {
  Pattern out = *this;
  for (std::int64_t r = 0; r < out.bits_.extents().row_count(); ++r) {
    for (auto& w : out.bits_.row(r)) w = ~w;
  }
  out.bits_.normalize();
  return out;
}

// ---------------------------------------------------------------- FieldSample

FieldSample::FieldSample(BitGrid bits, Provenance provenance)
    : bits_(std::move(bits)), provenance_(std::move(provenance)) {}

Pattern FieldSample::extract(const Cube& cube, const Point& offset) const {
  const Box box = cube.at(offset);
  if (!box_inside(box, window())) throw DomainError("cube placement leaves the window");
  BitGrid bits(cube.extents());
  const std::int64_t len = cube.n() + 1;
  const int d = cube.dim();
  for_each_site(Box{{0, 0, 0}, leading_extents(cube.extents())}, [&](const Point& lead) {
    const std::int64_t src = bits_.row_index(lead[0] + offset[0], lead[1] + offset[1]);
    auto out = bits.row(bits.row_index(lead[0], lead[1]));
    for (std::int64_t c = 0; c < len; c += 64) out[c / 64] = bits_.load64(src, offset[d - 1] + c);
  });
  bits.normalize();
  return Pattern(cube, std::move(bits));
}

// ---------------------------------------------------------------- DistortionSpec

std::int64_t ball_threshold_for_sites(double epsilon, std::int64_t sites) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ArgumentError("epsilon must lie in [0,1]");
  }
  if (epsilon == 1.0) return sites;
  const auto e = static_cast<std::int64_t>(std::floor(epsilon * static_cast<double>(sites) + 1e-9));
  return std::clamp<std::int64_t>(e, 0, sites);
}

std::int64_t ball_threshold(double epsilon, const Cube& cube) {
  return ball_threshold_for_sites(epsilon, cube.sites());
}

DistortionSpec::DistortionSpec(double epsilon) : epsilon_(epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("epsilon must lie in [0,1]");
}

std::int64_t DistortionSpec::threshold(const Cube& cube) const {
  return ball_threshold(epsilon_, cube);
}

std::int64_t DistortionSpec::threshold_for_sites(std::int64_t sites) const {
  return ball_threshold_for_sites(epsilon_, sites);
}

// ---------------------------------------------------------------- Hamming

std::int64_t count_mismatches(const BitGrid& a, const Point& a_lo, const BitGrid& b,
                              const Point& b_lo, const Extents& extents) {
  const int d = extents.dim;
  const std::int64_t len = extents.row_length();
  if (extents.volume() == 0) return 0;
  std::int64_t total = 0;
  for_each_site(Box{{0, 0, 0}, leading_extents(extents)}, [&](const Point& lead) {
    const std::int64_t ra = a.row_index(a_lo[0] + lead[0], a_lo[1] + lead[1]);
    const std::int64_t rb = b.row_index(b_lo[0] + lead[0], b_lo[1] + lead[1]);
    const std::int64_t ca = a_lo[d - 1];
    const std::int64_t cb = b_lo[d - 1];
    for (std::int64_t c = 0; c < len; c += 64) {
      const std::uint64_t x = a.load64(ra, ca + c) ^ b.load64(rb, cb + c);
      total += std::popcount(x & low_mask(len - c));
    }
  });
  return total;
}

std::int64_t hamming_delta(const Box& v, const BitGrid& eta, const BitGrid& sigma) {
  if (!box_inside(v, eta.extents()) || !box_inside(v, sigma.extents())) {
    throw DomainError("site set not contained in both configuration domains");
  }
  return count_mismatches(eta, v.lo, sigma, v.lo, v.extents);
}

bool epsilon_match(const Pattern& pattern, const BitGrid& sigma, const Point& offset,
                   std::int64_t threshold) {
  const Box placed = pattern.cube().at(offset);
  if (!box_inside(placed, sigma.extents())) {
    throw DomainError("pattern placement leaves the window");
  }
  return count_mismatches(pattern.grid(), {0, 0, 0}, sigma, offset, placed.extents) <= threshold;
}

bool epsilon_match(const Pattern& pattern, const FieldSample& sigma, const Point& offset,
                   const DistortionSpec& spec) {
  return epsilon_match(pattern, sigma.grid(), offset, spec.threshold(pattern.cube()));
}

// ---------------------------------------------------------------- text format

namespace {

void write_rows(std::ostream& out, const BitGrid& g) {
  const Extents& e = g.extents();
  std::string line(static_cast<std::size_t>(e.row_length()), '0');
  for (std::int64_t r = 0; r < e.row_count(); ++r) {
    auto words = g.row(r);
    for (std::int64_t c = 0; c < e.row_length(); ++c) {
      line[static_cast<std::size_t>(c)] = ((words[c >> 6] >> (c & 63)) & 1U) ? '1' : '0';
    }
    out << line << '\n';
  }
}

struct ParsedText {
  std::vector<std::string> comments;
  std::vector<std::int64_t> header;
  std::vector<std::string> rows;
};

ParsedText parse_text(std::istream& in) {
  ParsedText t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (!have_header) t.comments.push_back(line.substr(1));
      continue;
    }
    if (!have_header) {
      std::istringstream hs(line);
      std::int64_t v;
      while (hs >> v) t.header.push_back(v);
      if (!hs.eof()) throw ArgumentError("malformed header line: " + line);
      have_header = true;
    } else {
      t.rows.push_back(line);
    }
  }
  if (!have_header) throw ArgumentError("missing header line");
  return t;
}

void fill_rows(BitGrid& g, const std::vector<std::string>& rows) {
  const Extents& e = g.extents();
  if (static_cast<std::int64_t>(rows.size()) != e.row_count()) {
    throw ArgumentError("expected " + std::to_string(e.row_count()) + " rows, got " +
                        std::to_string(rows.size()));
  }
  for (std::int64_t r = 0; r < e.row_count(); ++r) {
    const std::string& s = rows[static_cast<std::size_t>(r)];
    if (static_cast<std::int64_t>(s.size()) != e.row_length()) {
      throw ArgumentError("row " + std::to_string(r) + " has wrong length");
    }
    auto words = g.row(r);
    for (std::int64_t c = 0; c < e.row_length(); ++c) {
      const char ch = s[static_cast<std::size_t>(c)];
      if (ch != '0' && ch != '1') throw ArgumentError("row characters must be 0 or 1");
      if (ch == '1') words[c >> 6] |= std::uint64_t{1} << (c & 63);
    }
  }
}

}  // namespace

void write_text(std::ostream& out, const Pattern& pattern) {
  out << pattern.cube().dim() << ' ' << pattern.cube().n() << '\n';
  write_rows(out, pattern.grid());
}

void write_text(std::ostream& out, const FieldSample& sample) {
  const Provenance& p = sample.provenance();
  out << "# model=" << p.model << " seed=" << p.seed << " replica=" << p.replica
      << " generator=" << p.generator << " sweeps=" << p.sweeps << '\n';
  const Extents& e = sample.window();
  out << e.dim;
  for (int i = 0; i < e.dim; ++i) out << ' ' << e.side[i] - 1;
  out << '\n';
  write_rows(out, sample.grid());
}

Pattern read_pattern(std::istream& in) {
  const ParsedText t = parse_text(in);
  if (t.header.size() != 2) throw ArgumentError("pattern header must be 'd n'");
  const Cube cube(t.header[1], static_cast<int>(t.header[0]));
  BitGrid g(cube.extents());
  fill_rows(g, t.rows);
  return Pattern(cube, std::move(g));
}

FieldSample read_field_sample(std::istream& in) {
  const ParsedText t = parse_text(in);
  if (t.header.empty()) throw ArgumentError("empty header");
  const int d = static_cast<int>(t.header[0]);
  check_dim(d);
  Point max_coord{0, 0, 0};
  if (t.header.size() == 2) {
    for (int i = 0; i < d; ++i) max_coord[i] = t.header[1];
  } else if (static_cast<int>(t.header.size()) == d + 1) {
    for (int i = 0; i < d; ++i) max_coord[i] = t.header[static_cast<std::size_t>(i) + 1];
  } else {
    throw ArgumentError("field header must be 'd L_1 ... L_d'");
  }
  BitGrid g(Extents::from_max(d, max_coord));
  fill_rows(g, t.rows);
  Provenance prov;
  for (const std::string& c : t.comments) {
    std::istringstream cs(c);
    std::string tok;
    while (cs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "model") prov.model = val;
      else if (key == "seed") prov.seed = std::stoull(val);
      else if (key == "replica") prov.replica = std::stoull(val);
      else if (key == "generator") prov.generator = val;
      else if (key == "sweeps") prov.sweeps = std::stoll(val);
    }
  }
  return FieldSample(std::move(g), std::move(prov));
}

std::string to_string(const Pattern& pattern) {
  std::ostringstream os;
  write_text(os, pattern);
  return os.str();
}

std::string to_string(const FieldSample& sample) {
  std::ostringstream os;
  write_text(os, sample);
  return os.str();
}

}  // namespace apm
