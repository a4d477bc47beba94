#include "apmatch/erdosrenyi.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "apmatch/errors.hpp"
#include "apmatch/estimators.hpp"
#include "apmatch/matching.hpp"
#include "apmatch/parallel.hpp"

namespace apm {

namespace {

/// Streaming Bernoulli(1/2) bits from one sequential stream.
class BitStream {
 public:
  explicit BitStream(std::uint64_t key) : rng_(key) {}
  int next() {
    if (left_ == 0) {
      word_ = rng_.next();
      left_ = 64;
    }
    const int b = static_cast<int>(word_ & 1U);
    word_ >>= 1;
    --left_;
    return b;
  }

 private:
  Rng rng_;
  std::uint64_t word_ = 0;
  int left_ = 0;
};

/// Slides a window of `width` bits over the stream, reporting the ones count of
/// each complete window in order.
template <typename Fn>
void scan_windows(std::int64_t width, std::int64_t windows, std::uint64_t key, Fn&& fn) {
  BitStream bits(key);
  std::vector<std::uint8_t> ring(static_cast<std::size_t>(width), 0);
  std::int64_t ones = 0;
  for (std::int64_t i = 0; i < width; ++i) {
    ring[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(bits.next());
    ones += ring[static_cast<std::size_t>(i)];
  }
  std::size_t pos = 0;
  for (std::int64_t k = 0; k < windows; ++k) {
    if (!fn(k, ones)) return;
    if (k + 1 == windows) return;
    const int b = bits.next();
    ones += b - ring[pos];
    ring[pos] = static_cast<std::uint8_t>(b);
    pos = pos + 1 == ring.size() ? 0 : pos + 1;
  }
}

double quantile_sorted(const std::vector<double>& v, double prob) {
  const double h = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

WalkPath::WalkPath(std::vector<std::int8_t> steps) : steps_(std::move(steps)) {
  for (auto s : steps_) {
    if (s != 1 && s != -1) throw ArgumentError("walk steps must be +1 or -1");
  }
}

WalkPath WalkPath::from_bits(std::span<const std::uint8_t> omega) {
  std::vector<std::int8_t> steps;
  steps.reserve(omega.size());
  for (auto b : omega) {
    if (b > 1) throw ArgumentError("binary string holds a value other than 0 or 1");
    steps.push_back(static_cast<std::int8_t>(1 - 2 * b));
  }
  return WalkPath(std::move(steps));
}

std::vector<std::int64_t> WalkPath::partial_sums() const {
  std::vector<std::int64_t> s(steps_.size() + 1, 0);
  for (std::size_t i = 0; i < steps_.size(); ++i) s[i + 1] = s[i] + steps_[i];
  return s;
}

std::int64_t max_window_increment(const WalkPath& walk, std::int64_t n) {
  if (n < 0) throw ArgumentError("window index n must be nonnegative");
  if (walk.length() < n + 1) throw ArgumentError("walk is shorter than one window of n+1 steps");
  const auto& steps = walk.steps();
  std::int64_t sum = 0;
  for (std::int64_t i = 0; i <= n; ++i) sum += steps[static_cast<std::size_t>(i)];
  std::int64_t best = sum;
  for (std::int64_t k = 1; k + n < walk.length(); ++k) {
    sum += steps[static_cast<std::size_t>(k + n)] - steps[static_cast<std::size_t>(k - 1)];
    best = std::max(best, sum);
  }
  return best;
}

std::int64_t walk_ones_budget(std::int64_t n, double epsilon) {
  const double level = (1.0 - 2.0 * epsilon) * static_cast<double>(n + 1);
  std::int64_t budget = -1;
  for (std::int64_t j = 0; j <= n + 1; ++j) {
    if (static_cast<double>(n + 1 - 2 * j) >= level - 1e-9) budget = j;
  }
  return budget;
}

double IdentityCheck::lhs_probability() const { return std::ldexp(static_cast<double>(lhs), -static_cast<int>(length)); }
double IdentityCheck::rhs_probability() const { return std::ldexp(static_cast<double>(rhs), -static_cast<int>(length)); }

std::uint64_t count_early_hits(const Pattern& pattern, std::int64_t k_n, double epsilon) {
  if (pattern.cube().dim() != 1) throw ArgumentError("exhaustive hit counts are defined for d = 1");
  if (k_n < 0) throw ArgumentError("k_n must be nonnegative");
  const std::int64_t n = pattern.cube().n();
  const std::int64_t length = n + k_n + 1;
  if (length > kIdentityLengthCap) {
    throw EstimationError("exhaustive enumeration refused: n + k_n + 1 = " + std::to_string(length) +
                          " exceeds " + std::to_string(kIdentityLengthCap));
  }
  const PatternMatcher matcher(pattern, DistortionSpec(epsilon).threshold(pattern.cube()));
  const std::uint64_t total = std::uint64_t{1} << length;
  constexpr std::uint64_t kChunk = 1 << 14;
  const auto chunks = static_cast<std::int64_t>((total + kChunk - 1) / kChunk);
  std::vector<std::uint64_t> partial(static_cast<std::size_t>(chunks), 0);
  const int lanes = static_cast<int>(k_n + 1);
  parallel_for(chunks, [&](std::int64_t c) {
    BitGrid grid(Extents::cube(1, length));
    std::uint64_t count = 0;
    const std::uint64_t end = std::min(total, (static_cast<std::uint64_t>(c) + 1) * kChunk);
    for (std::uint64_t s = static_cast<std::uint64_t>(c) * kChunk; s < end; ++s) {
      grid.row(0)[0] = s;
      if (matcher.match_block(grid, 0, 0, 0, lanes) != 0) ++count;
    }
    partial[static_cast<std::size_t>(c)] = count;
  });
  std::uint64_t sum = 0;
  for (auto v : partial) sum += v;
  return sum;
}

IdentityCheck walk_hitting_identity_check(std::int64_t n, std::int64_t k_n, double epsilon) {
  if (n < 0) throw ArgumentError("n must be nonnegative");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("epsilon must lie in [0,1]");
  IdentityCheck out;
  out.lhs = count_early_hits(Pattern(Cube(n, 1)), k_n, epsilon);
  out.length = n + k_n + 1;

  const double level = (1.0 - 2.0 * epsilon) * static_cast<double>(n + 1);
  const std::uint64_t total = std::uint64_t{1} << out.length;
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(out.length));
  for (std::uint64_t s = 0; s < total; ++s) {
    for (std::int64_t i = 0; i < out.length; ++i) bits[static_cast<std::size_t>(i)] = (s >> i) & 1U;
    const auto m = max_window_increment(WalkPath::from_bits(bits), n);
    if (static_cast<double>(m) >= level - 1e-9) ++out.rhs;
  }
  return out;
}

// ---------------------------------------------------------------- coefficient fit

double predict_kn(const ErCoefficients& coeffs, std::int64_t n) {
  const double y = (1.0 - 2.0 * coeffs.epsilon) * static_cast<double>(n + 1);
  if (coeffs.b == 0.0) return std::exp((y - coeffs.c) / coeffs.a);
  auto f = [&](double u) { return coeffs.a * u + coeffs.b * std::log(u) + coeffs.c - y; };
  double lo = 1.0 + 1e-12;
  double hi = 700.0;
  if (f(lo) > 0.0 || f(hi) < 0.0) throw EstimationError("fitted relation has no solution k_n > e");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

ErCoefficients fit_er_target(std::span<const double> k_values, std::span<const double> target, bool loglog_term) {
  if (k_values.size() != target.size()) throw ArgumentError("k values and targets differ in length");
  const Eigen::Index rows = static_cast<Eigen::Index>(k_values.size());
  const Eigen::Index cols = loglog_term ? 3 : 2;
  if (rows < 3) throw ArgumentError("the fit needs at least three sizes");
  Eigen::MatrixXd x(rows, cols);
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double k = k_values[static_cast<std::size_t>(i)];
    if (!(k > std::exp(1.0))) throw EstimationError("k_n must exceed e for the log-log term");
    x(i, 0) = std::log(k);
    if (loglog_term) x(i, 1) = std::log(std::log(k));
    x(i, cols - 1) = 1.0;
    y(i) = target[static_cast<std::size_t>(i)];
  }
  const auto qr = x.colPivHouseholderQr();
  if (qr.rank() < cols) throw EstimationError("degenerate design matrix in the coefficient fit");
  const Eigen::VectorXd beta = qr.solve(y);
  ErCoefficients out;
  out.loglog_term = loglog_term;
  out.a = beta(0);
  out.b = loglog_term ? beta(1) : 0.0;
  out.c = beta(cols - 1);
  out.residual = std::sqrt((x * beta - y).squaredNorm() / static_cast<double>(rows));
  out.k_empirical.assign(k_values.begin(), k_values.end());
  out.target.assign(target.begin(), target.end());
  return out;
}

std::int64_t first_passage_index(std::int64_t n, std::int64_t ones_budget, std::int64_t k_cap, std::uint64_t key) {
  std::int64_t found = -1;
  scan_windows(n + 1, k_cap + 1, key, [&](std::int64_t k, std::int64_t ones) {
    if (ones <= ones_budget) {
      found = k;
      return false;
    }
    return true;
  });
  return found;
}

ErCoefficients fit_er_coefficients(std::span<const std::int64_t> n_values, std::span<const double> k_values,
                                   double epsilon, std::int64_t replicas, const SeedSpec& seed, bool loglog_term) {
  if (!(epsilon >= 0.0 && epsilon < 0.5)) throw ArgumentError("epsilon must lie in [0, 1/2)");
  if (replicas < 1) throw ArgumentError("replicas must be at least 1");
  std::vector<std::int64_t> sizes(n_values.begin(), n_values.end());
  std::sort(sizes.begin(), sizes.end());
  if (std::unique(sizes.begin(), sizes.end()) - sizes.begin() < 3) throw ArgumentError("the fit needs at least three distinct sizes");
  std::vector<double> grid(k_values.begin(), k_values.end());
  std::sort(grid.begin(), grid.end());
  if (grid.empty() || grid.front() < 1.0) throw ArgumentError("k values must be at least 1");
  const auto k_cap = static_cast<std::int64_t>(grid.back());

  std::vector<double> k_emp;
  std::vector<double> target;
  for (std::size_t s = 0; s < n_values.size(); ++s) {
    const std::int64_t n = n_values[s];
    const std::int64_t budget = walk_ones_budget(n, epsilon);
    const SeedSpec size_seed = seed.child(static_cast<std::uint64_t>(n));
    std::vector<std::int64_t> tau(static_cast<std::size_t>(replicas));
    parallel_for(replicas, [&](std::int64_t r) {
      tau[static_cast<std::size_t>(r)] =
          first_passage_index(n, budget, k_cap, size_seed.with_replica(static_cast<std::uint64_t>(r)).stream_key());
    });
    // P̂(max over windows k' <= k reaches the level) = P̂(τ <= k).
    auto cdf = [&](double k) {
      std::int64_t c = 0;
      for (auto t : tau) c += (t >= 0 && static_cast<double>(t) <= k) ? 1 : 0;
      return static_cast<double>(c) / static_cast<double>(replicas);
    };
    double kn = -1.0;
    double prev_k = 0.0;
    double prev_f = 0.0;
    for (double k : grid) {
      const double f = cdf(k);
      if (f >= 0.5) {
        if (prev_k <= 0.0 || f == prev_f) {
          kn = k;
        } else {
          const double t = (0.5 - prev_f) / (f - prev_f);
          kn = std::exp(std::log(prev_k) + t * (std::log(k) - std::log(prev_k)));
        }
        break;
      }
      prev_k = k;
      prev_f = f;
    }
    if (kn < 0.0) throw EstimationError("k grid does not reach probability 1/2 at n = " + std::to_string(n));
    k_emp.push_back(kn);
    target.push_back((1.0 - 2.0 * epsilon) * static_cast<double>(n + 1));
  }
  ErCoefficients out = fit_er_target(k_emp, target, loglog_term);
  out.n_values.assign(n_values.begin(), n_values.end());
  out.replicas = replicas;
  out.epsilon = epsilon;
  out.seed = seed;
  return out;
}

// ---------------------------------------------------------------- bad pattern

BadPatternReport bad_pattern_nontriviality(std::int64_t n, double epsilon, std::int64_t replicas,
                                           const SeedSpec& seed) {
  if (n < 0) throw ArgumentError("n must be nonnegative");
  if (replicas < 1) throw ArgumentError("replicas must be at least 1");
  const Cube cube(n, 1);
  const Pattern zeros(cube);
  const DistortionSpec spec(epsilon);
  BadPatternReport out;
  out.ball_probability = ball_probability_exact(FieldModel::bernoulli(0.5), zeros, spec).value;
  const double inverse = 1.0 / out.ball_probability;
  if (!(inverse < static_cast<double>(kMaxBadPatternKn))) {
    throw ArgumentError("k_n = 1/P exceeds " + std::to_string(kMaxBadPatternKn) + "; reduce n or raise epsilon");
  }
  out.k_n = std::llround(inverse);
  if (out.ball_probability >= 1.0) {
    out.degenerate = true;
    out.estimate = Estimate::exact(1.0);
    out.p_low = out.p_high = 1.0;
    return out;
  }
  const PatternMatcher matcher(zeros, spec.threshold(cube));
  const std::int64_t l_max = out.k_n + n;
  std::vector<std::uint8_t> early(static_cast<std::size_t>(replicas), 0);
  parallel_for(replicas, [&](std::int64_t r) {
    LazyBernoulliSource source(0.5, 1, seed.with_replica(static_cast<std::uint64_t>(r)), l_max + 1);
    early[static_cast<std::size_t>(r)] = matcher.first_hit(source, l_max).hit() ? 1 : 0;
  });
  std::int64_t count = 0;
  for (auto e : early) count += e;
  const double f = static_cast<double>(count) / static_cast<double>(replicas);
  const double se = std::sqrt(f * (1.0 - f) / static_cast<double>(replicas));
  out.estimate = Estimate::monte_carlo(f, se, replicas, seed);
  out.p_low = f - 3.0 * se;
  out.p_high = f + 3.0 * se;
  out.inside = out.p_low > 0.0 && out.p_high < 1.0;
  return out;
}

// ---------------------------------------------------------------- Gumbel

GumbelReport gumbel_standardized_ks(std::vector<double> samples, double lattice_step) {
  if (samples.size() < 2) throw ArgumentError("Gumbel check needs at least two samples");
  std::sort(samples.begin(), samples.end());
  GumbelReport out;
  out.replicas = static_cast<std::int64_t>(samples.size());
  out.median = quantile_sorted(samples, 0.5);
  out.iqr = quantile_sorted(samples, 0.75) - quantile_sorted(samples, 0.25);
  if (!(out.iqr > 0.0)) throw EstimationError("interquartile range is 0; the sample is too concentrated");
  const double scale = kGumbelIqr / out.iqr;
  for (double& v : samples) v = kGumbelMedian + (v - out.median) * scale;
  out.lattice_span = lattice_step * scale;
  out.ks = ks_statistic(std::move(samples), [](double z) { return std::exp(-std::exp(-z)); });
  return out;
}

GumbelReport gumbel_fluctuation_check(std::int64_t n, std::int64_t k_n, std::int64_t replicas, const SeedSpec& seed) {
  if (n < 0 || k_n < 0) throw ArgumentError("n and k_n must be nonnegative");
  if (replicas < kMinGumbelReplicas) {
    throw ArgumentError("Gumbel check needs at least " + std::to_string(kMinGumbelReplicas) + " replicas");
  }
  std::vector<double> maxima(static_cast<std::size_t>(replicas));
  parallel_for(replicas, [&](std::int64_t r) {
    std::int64_t fewest = std::numeric_limits<std::int64_t>::max();
    scan_windows(n + 1, k_n + 1, seed.with_replica(static_cast<std::uint64_t>(r)).stream_key(),
                 [&](std::int64_t, std::int64_t ones) {
                   fewest = std::min(fewest, ones);
                   return true;
                 });
    maxima[static_cast<std::size_t>(r)] = static_cast<double>(n + 1 - 2 * fewest);
  });
  return gumbel_standardized_ks(std::move(maxima), 2.0);
}

}  // namespace apm
