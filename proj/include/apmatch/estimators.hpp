#pragma once

// Ball probabilities, rate-distortion estimates, the exponential-law fit and
// its Kolmogorov-Smirnov check, the Rényi functional and moment ratios.
// All logarithms are natural; rates are in nats per site.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "apmatch/errors.hpp"
#include "apmatch/estimate.hpp"
#include "apmatch/fields.hpp"
#include "apmatch/goodness.hpp"
#include "apmatch/lattice.hpp"
#include "apmatch/matching.hpp"

namespace apm {

// ---------------------------------------------------------------- ball probabilities

/// Exact P([A]^ε) under the product law Bernoulli(p), generic in the number
/// type so it can be evaluated in rational arithmetic. Convolves per-site
/// mismatch probabilities (p at 0-sites of A, 1−p at 1-sites), keeping counts
/// 0..E, and sums them.
template <typename Real>
Real ball_probability_product(const Real& p, std::int64_t zeros, std::int64_t ones, std::int64_t threshold) {
  const std::int64_t sites = zeros + ones;
  if (threshold >= sites) return Real(1);
  const auto width = static_cast<std::size_t>(threshold + 1);
  std::vector<Real> dist(width, Real(0));
  dist[0] = Real(1);
  const Real q1 = Real(1) - p;  // mismatch probability at a 1-site
  auto absorb = [&](const Real& miss, std::int64_t count) {
    const Real hit = Real(1) - miss;
    for (std::int64_t s = 0; s < count; ++s) {
      for (std::size_t k = width; k-- > 0;) {
        dist[k] = dist[k] * hit + (k > 0 ? dist[k - 1] * miss : Real(0));
      }
    }
  };
  absorb(p, zeros);
  absorb(q1, ones);
  Real total(0);
  for (const Real& v : dist) total += v;
  return total;
}

Estimate ball_probability_exact(const FieldModel& model, const Pattern& pattern, const DistortionSpec& spec);

/// Fraction of `replicas` independent draws of σ_{C_n} that fall in [A]^ε.
Estimate ball_probability_mc(const FieldModel& model, const Pattern& pattern, const DistortionSpec& spec,
                             std::int64_t replicas, const SeedSpec& seed);

// ---------------------------------------------------------------- rate distortion

/// Binary entropy in nats.
double binary_entropy(double p);

/// Closed-form single-letter R(D) = H(p) − H(D) for a Bernoulli(p) source under
/// Hamming distortion, 0 once D >= min(p, 1−p).
double binary_rate_distortion(double source_p, double distortion);

/// R̂ = −(1/|C_n|) ln P̂([ω_{C_n}]^ε); exact for product P, Monte Carlo otherwise.
Estimate rd_aep(const FieldModel& p_model, const Pattern& omega, const DistortionSpec& spec,
                std::int64_t replicas, const SeedSpec& seed);
/// As above with ω_{C_n} drawn from Q.
Estimate rd_aep(const FieldModel& p_model, const FieldModel& q_model, const Cube& cube,
                const DistortionSpec& spec, std::int64_t replicas, const SeedSpec& seed);

struct BlahutArimotoResult {
  double rate = 0.0;        // nats
  double distortion = 0.0;  // achieved average distortion
  double slope = 0.0;       // Lagrange multiplier at the solution
  bool degenerate = false;  // ε outside (0, min(p, 1−p))
  std::int64_t iterations = 0;
};

/// Alternating minimisation for the binary-source / Hamming rate-distortion
/// function at average distortion ε, with a bisection on the slope.
BlahutArimotoResult rd_blahut_arimoto(double source_p, double epsilon, double tolerance = 1e-9);

// ---------------------------------------------------------------- exponential law

struct LambdaFit {
  Estimate lambda;
  std::int64_t uncensored = 0;
  std::int64_t censored = 0;
  double exposure = 0.0;  // Σ T_i, censored entries at their cap
};

/// Λ̂ = (#uncensored) / (P̂ Σ_i T_i), the censored exponential MLE of E[Λ P T] = 1.
/// SE by the delta method: Λ̂ sqrt(1/#uncensored + (SE_P / P̂)^2).
LambdaFit lambda_fit(std::span<const double> times, std::span<const std::uint8_t> censored, const Estimate& p_hat);
LambdaFit lambda_fit(std::span<const HitResult> hits, const Estimate& p_hat);

/// Minimum number of uncensored hits lambda_fit accepts.
inline constexpr std::int64_t kMinUncensoredHits = 30;

struct SurvivalCurve {
  std::vector<double> times;     // distinct uncensored rescaled times, ascending
  std::vector<double> survival;  // Ŝ just after each time
  std::int64_t total = 0;
  std::int64_t censored = 0;
  double cap = 0.0;              // rescaled censoring cap, +inf without censoring
  double rescale = 1.0;          // Λ̂ P̂
};

/// Empirical survival of s_i = Λ̂ P̂ T_i. Censored entries stay at risk up to the cap.
SurvivalCurve survival_curve(std::span<const double> times, std::span<const std::uint8_t> censored, double rescale);
SurvivalCurve survival_curve(std::span<const HitResult> hits, double rescale);

/// Sup-distance between the empirical law of the rescaled times and Exp(1),
/// evaluated on [0, cap).
double ks_exponential(const SurvivalCurve& curve);

/// Sup-distance between the empirical law of complete data and a continuous CDF.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

// ---------------------------------------------------------------- Rényi functional and moments

enum class EnumerationMode { exact, monte_carlo };

/// Largest |C_n| accepted by the exact Rényi enumeration.
inline constexpr std::int64_t kRenyiExactCap = 20;

/// (1/|C_n|) ln ∫ P([ω_{C_n}]^ε)^q dQ_{G_n(ε,α)}(ω).
///
/// Exact mode enumerates all patterns, keeps the good ones and weights them by
/// the product law Q; ball probabilities are exact for product P and otherwise
/// estimated from one shared set of `replicas` draws of P. Monte Carlo mode
/// draws `replicas` patterns from Q and rejects the non-good ones.
Estimate renyi_functional(double q, const FieldModel& p_model, const FieldModel& q_model, const Cube& cube,
                          const DistortionSpec& spec, double alpha, EnumerationMode mode, std::int64_t replicas,
                          const SeedSpec& seed);

struct MomentRatio {
  Estimate lhs;  // ∬ W^q dQ_G dP
  Estimate rhs;  // ∫ P([ω]^ε)^{-q} dQ_G  (q >= −1),  ∫ P([ω]^ε) dQ_G  (q < −1)
  double ratio = 1.0;
  double censored_fraction = 0.0;
};

/// Censored fraction above which moment_ratio refuses to report.
inline constexpr double kMaxCensoredFraction = 0.01;

MomentRatio moment_ratio(double q, const FieldModel& p_model, const FieldModel& q_model, const Cube& cube,
                         const DistortionSpec& spec, double alpha, std::int64_t replicas, std::int64_t l_max,
                         const SeedSpec& seed);

}  // namespace apm
