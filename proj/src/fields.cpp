#include "apmatch/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "apmatch/errors.hpp"
#include "apmatch/format.hpp"
#include "apmatch/parallel.hpp"

namespace apm {

namespace {

constexpr std::uint64_t kTagBernoulli = 0xB0;
constexpr std::uint64_t kTagIsing = 0x15;
constexpr std::uint64_t kSiteDomain = 0x5BD1E9955BD1E995ULL;

Provenance make_provenance(const FieldModel& model, const SeedSpec& seed) {
  return Provenance{model.describe(), seed.master, seed.replica, seed.generator,
                    model.kind == ModelKind::ising ? model.sweeps : 0};
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ArgumentError("cannot parse " + what + " from '" + s + "'");
  }
}

}  // namespace

// ---------------------------------------------------------------- FieldModel

FieldModel FieldModel::bernoulli(double p) {
  FieldModel m;
  m.kind = ModelKind::bernoulli;
  m.p = p;
  m.validate();
  return m;
}

FieldModel FieldModel::ising(double beta, double h, std::int64_t sweeps) {
  FieldModel m;
  m.kind = ModelKind::ising;
  m.beta = beta;
  m.h = h;
  m.sweeps = sweeps;
  m.validate();
  return m;
}

void FieldModel::validate() const {
  if (kind == ModelKind::bernoulli) {
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("bernoulli p must lie in [0,1]");
  } else {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ArgumentError("ising beta must be >= 0");
    if (!std::isfinite(h)) throw ArgumentError("ising h must be finite");
    if (sweeps < 1) throw ArgumentError("ising sweeps must be positive");
  }
}

std::string FieldModel::describe() const {
  if (kind == ModelKind::bernoulli) return "bernoulli(p=" + format_number(p) + ")";
  return "ising(beta=" + format_number(beta) + ",h=" + format_number(h) +
         ",sweeps=" + std::to_string(sweeps) + ")";
}

FieldModel FieldModel::parse(const std::string& raw) {
  std::string text;
  for (char c : raw) {
    if (c != ' ' && c != '\t') text.push_back(static_cast<char>(std::tolower(c)));
  }
  std::string name = text;
  std::string args;
  if (auto colon = text.find(':'); colon != std::string::npos) {
    name = text.substr(0, colon);
    const std::string value = text.substr(colon + 1);
    if (name == "bernoulli") return bernoulli(parse_double(value, "bernoulli p"));
    if (name == "ising") return ising(parse_double(value, "ising beta"), 0.0);
    throw ArgumentError("unknown model '" + name + "'");
  }
  if (auto open = text.find('('); open != std::string::npos) {
    if (text.back() != ')') throw ArgumentError("unbalanced parentheses in model '" + raw + "'");
    name = text.substr(0, open);
    args = text.substr(open + 1, text.size() - open - 2);
  }
  FieldModel m;
  if (name == "bernoulli") {
    m.kind = ModelKind::bernoulli;
  } else if (name == "ising") {
    m.kind = ModelKind::ising;
  } else {
    throw ArgumentError("unknown model '" + name + "'");
  }
  std::istringstream in(args);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ArgumentError("model argument '" + item + "' lacks '='");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "p" && m.kind == ModelKind::bernoulli) {
      m.p = parse_double(val, "p");
    } else if (key == "beta" && m.kind == ModelKind::ising) {
      m.beta = parse_double(val, "beta");
    } else if (key == "h" && m.kind == ModelKind::ising) {
      m.h = parse_double(val, "h");
    } else if (key == "sweeps" && m.kind == ModelKind::ising) {
      m.sweeps = static_cast<std::int64_t>(parse_double(val, "sweeps"));
    } else {
      throw ArgumentError("unknown argument '" + key + "' for model " + name);
    }
  }
  m.validate();
  return m;
}

bool in_mixing_allowlist(const FieldModel& model, int dim, double beta_ceiling) {
  if (model.kind == ModelKind::bernoulli) return true;
  // The allowlist ceiling is calibrated for d = 2; critical couplings shrink with d.
  const double ceiling = dim == 1 ? std::numeric_limits<double>::infinity()
                                  : (dim == 2 ? beta_ceiling : beta_ceiling * 0.5);
  return model.beta <= ceiling;
}

double ising_conditional_up(double beta, double h, int neighbor_sum) {
  return 1.0 / (1.0 + std::exp(-2.0 * (beta * neighbor_sum + h)));
}

double finite_energy_delta(const FieldModel& model, int dim) {
  if (model.kind == ModelKind::bernoulli) return std::min(model.p, 1.0 - model.p);
  return 1.0 / (1.0 + std::exp(2.0 * model.beta * 2.0 * dim + 2.0 * std::abs(model.h)));
}

// ---------------------------------------------------------------- Bernoulli

void fill_bernoulli_rows(BitGrid& grid, double p, std::uint64_t key) {
  const Extents& e = grid.extents();
  const std::int64_t len = e.row_length();
  if (p <= 0.0 || p >= 1.0) {
    grid.fill(p >= 1.0);
    return;
  }
  const bool fair = p == 0.5;
  for_each_site(Box{{0, 0, 0}, leading_extents(e)}, [&](const Point& lead) {
    const std::uint64_t row_key =
        e.dim == 1 ? hash_combine(key, 0) : hash_combine(hash_combine(key, lead[0]), lead[1]);
    auto words = grid.row(grid.row_index(lead[0], lead[1]));
    if (fair) {
      for (std::int64_t w = 0; w * 64 < len; ++w) words[w] = hash_combine(row_key, w);
    } else {
      const std::uint64_t site_key = row_key ^ kSiteDomain;
      for (std::int64_t w = 0; w * 64 < len; ++w) {
        std::uint64_t word = 0;
        const std::int64_t stop = std::min<std::int64_t>(64, len - w * 64);
        for (std::int64_t b = 0; b < stop; ++b) {
          if (to_unit(hash_combine(site_key, w * 64 + b)) < p) word |= std::uint64_t{1} << b;
        }
        words[w] = word;
      }
    }
  });
  grid.normalize();
}

std::uint64_t bernoulli_stream_key(const SeedSpec& seed) { return seed.substream(kTagBernoulli); }

FieldSample sample_bernoulli(double p, const Extents& window, const SeedSpec& seed) {
  const FieldModel model = FieldModel::bernoulli(p);
  BitGrid grid(window);
  fill_bernoulli_rows(grid, p, bernoulli_stream_key(seed));
  return FieldSample(std::move(grid), make_provenance(model, seed));
}

// ---------------------------------------------------------------- Ising

FieldSample sample_ising(double beta, double h, const Extents& window, std::int64_t sweeps,
                         const SeedSpec& seed) {
  if (sweeps < 1) throw ArgumentError("sweeps must be positive");
  const FieldModel model = FieldModel::ising(beta, h, sweeps);
  const int d = window.dim;
  const std::int64_t volume = window.volume();
  if (volume == 0) throw ArgumentError("empty window");

  std::vector<std::int8_t> spin(static_cast<std::size_t>(volume));
  Rng rng(seed.substream(kTagIsing));
  for (auto& s : spin) s = (rng.next() >> 63) ? 1 : -1;

  // stride[i] = distance in the flat array between neighbours along axis i
  std::int64_t stride[kMaxDim] = {1, 1, 1};
  for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * window.side[i + 1];

  const int max_sum = 2 * d;
  std::vector<double> up(static_cast<std::size_t>(2 * max_sum + 1));
  for (int s = -max_sum; s <= max_sum; ++s) up[static_cast<std::size_t>(s + max_sum)] = ising_conditional_up(beta, h, s);

  for (std::int64_t sweep = 0; sweep < sweeps; ++sweep) {
    Point x{0, 0, 0};
    for (std::int64_t idx = 0; idx < volume; ++idx) {
      int sum = 0;
      for (int i = 0; i < d; ++i) {
        const std::int64_t side = window.side[i];
        const std::int64_t fwd = x[i] + 1 == side ? idx - (side - 1) * stride[i] : idx + stride[i];
        const std::int64_t back = x[i] == 0 ? idx + (side - 1) * stride[i] : idx - stride[i];
        sum += spin[static_cast<std::size_t>(fwd)] + spin[static_cast<std::size_t>(back)];
      }
      spin[static_cast<std::size_t>(idx)] =
          rng.uniform() < up[static_cast<std::size_t>(sum + max_sum)] ? 1 : -1;
      for (int i = d - 1; i >= 0; --i) {
        if (++x[i] < window.side[i]) break;
        x[i] = 0;
      }
    }
  }

  BitGrid grid(window);
  std::int64_t idx = 0;
  for_each_site(Box{{0, 0, 0}, window}, [&](const Point& p) {
    if (spin[static_cast<std::size_t>(idx++)] > 0) grid.set(p, true);
  });
  return FieldSample(std::move(grid), make_provenance(model, seed));
}

FieldSample sample_field(const FieldModel& model, const Extents& window, const SeedSpec& seed) {
  model.validate();
  if (model.kind == ModelKind::bernoulli) return sample_bernoulli(model.p, window, seed);
  return sample_ising(model.beta, model.h, window, model.sweeps, seed);
}

Extents pattern_window(const Cube& cube) {
  const std::int64_t side = cube.n() + 1;
  return Extents::cube(cube.dim(), std::max(2 * side, side + 16));
}

Pattern sample_pattern(const FieldModel& model, const Cube& cube, const SeedSpec& seed) {
  if (model.kind == ModelKind::bernoulli) {
    return sample_bernoulli(model.p, cube.extents(), seed).extract(cube);
  }
  return sample_field(model, pattern_window(cube), seed).extract(cube);
}

// ---------------------------------------------------------------- diagnostics

Estimate pair_correlation(const FieldModel& model, std::int64_t distance, const Extents& window,
                          std::int64_t replicas, const SeedSpec& seed) {
  model.validate();
  if (distance < 1) throw ArgumentError("distance must be positive");
  if (replicas < 2) throw ArgumentError("pair_correlation needs at least 2 replicas");
  for (int i = 0; i < window.dim; ++i) {
    if (2 * distance >= window.side[i]) {
      throw ArgumentError("window too small: distance must be below half of every extent");
    }
  }
  const bool periodic = model.kind == ModelKind::ising;
  const int d = window.dim;
  std::vector<double> cov(static_cast<std::size_t>(replicas));
  parallel_for(replicas, [&](std::int64_t r) {
    const FieldSample s = sample_field(model, window, seed.with_replica(static_cast<std::uint64_t>(r)));
    const BitGrid& g = s.grid();
    const double mean = static_cast<double>(g.count_ones()) / static_cast<double>(window.volume());
    double pair_sum = 0.0;
    for (int axis = 0; axis < d; ++axis) {
      std::int64_t both = 0;
      std::int64_t pairs = 0;
      for_each_site(Box{{0, 0, 0}, window}, [&](const Point& x) {
        Point y = x;
        y[axis] += distance;
        if (y[axis] >= window.side[axis]) {
          if (!periodic) return;
          y[axis] -= window.side[axis];
        }
        ++pairs;
        if (g.get(x) && g.get(y)) ++both;
      });
      pair_sum += static_cast<double>(both) / static_cast<double>(pairs);
    }
    cov[static_cast<std::size_t>(r)] = pair_sum / d - mean * mean;
  });
  double sum = 0.0;
  for (double c : cov) sum += c;
  const double mean = sum / static_cast<double>(replicas);
  double ss = 0.0;
  for (double c : cov) ss += (c - mean) * (c - mean);
  const double sd = std::sqrt(ss / static_cast<double>(replicas - 1));
  return Estimate::monte_carlo(mean, sd / std::sqrt(static_cast<double>(replicas)), replicas, seed);
}

}  // namespace apm
