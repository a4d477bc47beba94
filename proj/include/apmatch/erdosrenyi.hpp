#pragma once

// Hitting times of the all-zeros pattern under Bernoulli(1/2) in d = 1 and
// their random-walk description.
//
// With steps s_i = 1 − 2ω_i a window of n+1 sites holds at most E ones iff the
// walk increment over it is at least (1−2ε)(n+1), so the first match of
// [0_n]^ε is the first window whose increment reaches that level.

#include <cstdint>
#include <span>
#include <vector>

#include "apmatch/estimate.hpp"
#include "apmatch/lattice.hpp"
#include "apmatch/rng.hpp"

namespace apm {

class WalkPath {
 public:
  explicit WalkPath(std::vector<std::int8_t> steps);
  /// Steps 1 − 2ω_i of a binary string.
  static WalkPath from_bits(std::span<const std::uint8_t> omega);

  [[nodiscard]] std::int64_t length() const noexcept { return static_cast<std::int64_t>(steps_.size()); }
  [[nodiscard]] const std::vector<std::int8_t>& steps() const noexcept { return steps_; }
  /// S_0 = 0, S_j = s_0 + ... + s_{j−1}; length() + 1 entries.
  [[nodiscard]] std::vector<std::int64_t> partial_sums() const;

 private:
  std::vector<std::int8_t> steps_;
};

/// max_k (S_{k+n+1} − S_k): the largest increment over n+1 consecutive steps.
std::int64_t max_window_increment(const WalkPath& walk, std::int64_t n);

/// Largest number of ones a window of n+1 sites may hold while its walk
/// increment stays at or above (1−2ε)(n+1); −1 when no window qualifies.
std::int64_t walk_ones_budget(std::int64_t n, double epsilon);

/// Largest n + k_n + 1 accepted by exhaustive enumeration.
inline constexpr std::int64_t kIdentityLengthCap = 22;

struct IdentityCheck {
  std::int64_t length = 0;    // n + k_n + 1
  std::uint64_t lhs = 0;      // strings with T <= k_n
  std::uint64_t rhs = 0;      // strings whose max window increment reaches (1−2ε)(n+1)
  [[nodiscard]] double lhs_probability() const;
  [[nodiscard]] double rhs_probability() const;
  [[nodiscard]] bool equal() const noexcept { return lhs == rhs; }
};

/// Number of binary strings of length n + k_n + 1 in which some window
/// starting at index <= k_n lies in [A]^ε (A a d = 1 pattern).
std::uint64_t count_early_hits(const Pattern& pattern, std::int64_t k_n, double epsilon);

/// Exhaustive comparison of P(T_{[0_n]^ε} <= k_n) with
/// P(max_k (S_{k+n+1} − S_k) >= (1−2ε)(n+1)) over all strings of length n + k_n + 1.
IdentityCheck walk_hitting_identity_check(std::int64_t n, std::int64_t k_n, double epsilon);

struct ErCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  bool loglog_term = true;
  double residual = 0.0;                  // RMS of the fit
  std::vector<std::int64_t> n_values;
  std::vector<double> k_empirical;        // empirical k_n per size
  std::vector<double> target;             // (1−2ε)(n+1) per size
  std::int64_t replicas = 0;
  double epsilon = 0.0;
  SeedSpec seed{};
};

/// k with (1−2ε)(n+1) = a ln k + b ln ln k + c.
double predict_kn(const ErCoefficients& coeffs, std::int64_t n);

/// Least squares of target_i on (ln k_i, ln ln k_i, 1), or (ln k_i, 1) when
/// loglog_term is false. Needs at least as many distinct points as terms.
ErCoefficients fit_er_target(std::span<const double> k_values, std::span<const double> target,
                             bool loglog_term = true);

/// Simulates first-passage window indices for each n, takes the empirical k_n
/// where P(max over windows <= k >= level) crosses 1/2 (log-interpolated on
/// the k grid), then fits the coefficients.
ErCoefficients fit_er_coefficients(std::span<const std::int64_t> n_values, std::span<const double> k_values,
                                   double epsilon, std::int64_t replicas, const SeedSpec& seed,
                                   bool loglog_term = true);

/// Index of the first window of n+1 sites holding at most `ones_budget` ones in
/// a fresh Bernoulli(1/2) stream, or −1 if none starts at or before `k_cap`.
std::int64_t first_passage_index(std::int64_t n, std::int64_t ones_budget, std::int64_t k_cap, std::uint64_t key);

struct BadPatternReport {
  std::int64_t k_n = 0;
  double ball_probability = 0.0;
  Estimate estimate;  // P̂(T <= k_n)
  double p_low = 0.0;
  double p_high = 0.0;
  bool inside = false;      // 0 < p_low and p_high < 1
  bool degenerate = false;  // ball probability 1
};

/// Largest k_n accepted by bad_pattern_nontriviality.
inline constexpr std::int64_t kMaxBadPatternKn = std::int64_t{1} << 32;

BadPatternReport bad_pattern_nontriviality(std::int64_t n, double epsilon, std::int64_t replicas,
                                           const SeedSpec& seed);

inline constexpr double kGumbelMedian = 0.36651292058166435;  // −ln ln 2
inline constexpr double kGumbelIqr = 1.5725;

struct GumbelReport {
  double ks = 0.0;
  double median = 0.0;
  double iqr = 0.0;
  double lattice_span = 0.0;  // spacing of the standardized values
  std::int64_t replicas = 0;
};

/// Centres by the empirical median, scales by IQR / 1.5725 and measures the KS
/// distance to the standard Gumbel law.
GumbelReport gumbel_standardized_ks(std::vector<double> samples, double lattice_step = 0.0);

/// Minimum replicas for the Gumbel check.
inline constexpr std::int64_t kMinGumbelReplicas = 1000;

/// Max window increments of `replicas` walks with windows k = 0..k_n, standardized as above.
GumbelReport gumbel_fluctuation_check(std::int64_t n, std::int64_t k_n, std::int64_t replicas,
                                      const SeedSpec& seed);

}  // namespace apm
