#include "apmatch/estimators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "apmatch/parallel.hpp"

namespace apm {

namespace {

constexpr std::uint64_t kTagPattern = 0x51;
constexpr std::uint64_t kTagField = 0x52;

void require_replicas(std::int64_t replicas, std::int64_t minimum = 1) {
  if (replicas < minimum) throw ArgumentError("replicas must be at least " + std::to_string(minimum));
}

double product_ball(double p, const Cube& cube, std::int64_t ones, std::int64_t threshold) {
  return ball_probability_product<double>(p, cube.sites() - ones, ones, threshold);
}

/// Good patterns of C_n with their product-law Q weights, in index order.
struct GoodSet {
  std::vector<std::uint64_t> index;
  std::vector<double> weight;
  double total = 0.0;
};

GoodSet enumerate_good(const FieldModel& q_model, const GoodnessParams& params) {
  if (!q_model.is_product()) throw UnsupportedModelError("exact enumeration needs a product law Q");
  const std::int64_t sites = params.cube.sites();
  if (sites > kRenyiExactCap) {
    throw EstimationError("exact enumeration refused: |C_n| = " + std::to_string(sites) + " exceeds " +
                          std::to_string(kRenyiExactCap));
  }
  const std::uint64_t total = std::uint64_t{1} << sites;
  constexpr std::uint64_t kChunk = 4096;
  const auto chunks = static_cast<std::int64_t>((total + kChunk - 1) / kChunk);
  std::vector<GoodSet> parts(static_cast<std::size_t>(chunks));
  const double p = q_model.p;
  parallel_for(chunks, [&](std::int64_t c) {
    GoodSet& part = parts[static_cast<std::size_t>(c)];
    const std::uint64_t end = std::min(total, (static_cast<std::uint64_t>(c) + 1) * kChunk);
    for (std::uint64_t idx = static_cast<std::uint64_t>(c) * kChunk; idx < end; ++idx) {
      if (!params.vacuous() && !is_good(pattern_from_index(params.cube, idx), params)) continue;
      const int ones = std::popcount(idx);
      part.index.push_back(idx);
      part.weight.push_back(std::pow(p, ones) * std::pow(1.0 - p, static_cast<double>(sites - ones)));
    }
  });
  GoodSet out;
  for (auto& part : parts) {
    out.index.insert(out.index.end(), part.index.begin(), part.index.end());
    out.weight.insert(out.weight.end(), part.weight.begin(), part.weight.end());
  }
  for (double w : out.weight) out.total += w;
  if (out.index.empty() || out.total <= 0.0) throw EstimationError("no good pattern has positive Q-probability");
  return out;
}

/// Shared draws of σ_{C_n} from a non-product P, used to estimate many balls at once.
std::vector<Pattern> draw_reference(const FieldModel& p_model, const Cube& cube, std::int64_t replicas,
                                    const SeedSpec& seed) {
  require_replicas(replicas);
  std::vector<Pattern> draws(static_cast<std::size_t>(replicas), Pattern(cube));
  parallel_for(replicas, [&](std::int64_t r) {
    draws[static_cast<std::size_t>(r)] = sample_pattern(p_model, cube, seed.with_replica(static_cast<std::uint64_t>(r)));
  });
  return draws;
}

double reference_ball(const std::vector<Pattern>& draws, const Pattern& a, std::int64_t threshold) {
  std::int64_t inside = 0;
  const Extents ext = a.cube().extents();
  for (const Pattern& s : draws) {
    if (count_mismatches(a.grid(), {0, 0, 0}, s.grid(), {0, 0, 0}, ext) <= threshold) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(draws.size());
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

// ---------------------------------------------------------------- ball probabilities

Estimate ball_probability_exact(const FieldModel& model, const Pattern& pattern, const DistortionSpec& spec) {
  model.validate();
  if (!model.is_product()) throw UnsupportedModelError("exact ball probability needs a product law");
  const Cube& cube = pattern.cube();
  return Estimate::exact(product_ball(model.p, cube, pattern.grid().count_ones(), spec.threshold(cube)));
}

Estimate ball_probability_mc(const FieldModel& model, const Pattern& pattern, const DistortionSpec& spec,
                             std::int64_t replicas, const SeedSpec& seed) {
  model.validate();
  require_replicas(replicas);
  const Cube& cube = pattern.cube();
  const std::int64_t threshold = spec.threshold(cube);
  std::vector<std::uint8_t> inside(static_cast<std::size_t>(replicas), 0);
  parallel_for(replicas, [&](std::int64_t r) {
    const Pattern s = sample_pattern(model, cube, seed.with_replica(static_cast<std::uint64_t>(r)));
    inside[static_cast<std::size_t>(r)] =
        count_mismatches(pattern.grid(), {0, 0, 0}, s.grid(), {0, 0, 0}, cube.extents()) <= threshold;
  });
  const auto hits = std::accumulate(inside.begin(), inside.end(), std::int64_t{0});
  const double f = static_cast<double>(hits) / static_cast<double>(replicas);
  return Estimate::monte_carlo(f, std::sqrt(f * (1.0 - f) / static_cast<double>(replicas)), replicas, seed);
}

// ---------------------------------------------------------------- rate distortion

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log1p(-p);
}

double binary_rate_distortion(double source_p, double distortion) {
  if (distortion >= std::min(source_p, 1.0 - source_p)) return 0.0;
  return binary_entropy(source_p) - binary_entropy(std::max(0.0, distortion));
}

Estimate rd_aep(const FieldModel& p_model, const Pattern& omega, const DistortionSpec& spec,
                std::int64_t replicas, const SeedSpec& seed) {
  const auto sites = static_cast<double>(omega.cube().sites());
  if (p_model.is_product()) {
    const Estimate ball = ball_probability_exact(p_model, omega, spec);
    return Estimate::exact(-std::log(ball.value) / sites);
  }
  const Estimate ball = ball_probability_mc(p_model, omega, spec, replicas, seed);
  if (ball.value <= 0.0) {
    throw EstimationError("Monte Carlo ball probability is 0, so the rate estimate is infinite; raise replicas");
  }
  return Estimate::monte_carlo(-std::log(ball.value) / sites, ball.std_error / (ball.value * sites), replicas,
                               seed);
}

Estimate rd_aep(const FieldModel& p_model, const FieldModel& q_model, const Cube& cube,
                const DistortionSpec& spec, std::int64_t replicas, const SeedSpec& seed) {
  q_model.validate();
  const Pattern omega = sample_pattern(q_model, cube, seed.child(kTagPattern));
  return rd_aep(p_model, omega, spec, replicas, seed.child(kTagField));
}

BlahutArimotoResult rd_blahut_arimoto(double source_p, double epsilon, double tolerance) {
  if (!(source_p > 0.0 && source_p < 1.0)) throw ArgumentError("source_p must lie in (0,1)");
  if (!(tolerance > 0.0)) throw ArgumentError("tolerance must be positive");
  BlahutArimotoResult out;
  if (epsilon >= std::min(source_p, 1.0 - source_p)) {
    out.degenerate = true;
    out.distortion = std::min(source_p, 1.0 - source_p);
    return out;
  }
  if (epsilon <= 0.0) {
    out.degenerate = true;
    out.rate = binary_entropy(source_p);
    return out;
  }
  const double px[2] = {1.0 - source_p, source_p};

  // Fixed point of the alternating minimisation at slope −beta.
  auto solve = [&](double beta, double& rate, double& distortion) {
    const double penalty = std::exp(-beta);
    double q1 = 0.5;
    for (std::int64_t it = 0; it < 1000000; ++it) {
      ++out.iterations;
      double next = 0.0;
      for (int x = 0; x < 2; ++x) {
        const double w0 = (1.0 - q1) * (x == 0 ? 1.0 : penalty);
        const double w1 = q1 * (x == 1 ? 1.0 : penalty);
        next += px[x] * w1 / (w0 + w1);
      }
      const bool done = std::abs(next - q1) < tolerance * 1e-6;
      q1 = next;
      if (done) break;
    }
    rate = 0.0;
    distortion = 0.0;
    for (int x = 0; x < 2; ++x) {
      const double w0 = (1.0 - q1) * (x == 0 ? 1.0 : penalty);
      const double w1 = q1 * (x == 1 ? 1.0 : penalty);
      const double z = w0 + w1;
      const double cond[2] = {w0 / z, w1 / z};
      const double marg[2] = {1.0 - q1, q1};
      for (int y = 0; y < 2; ++y) {
        if (cond[y] <= 0.0) continue;
        rate += px[x] * cond[y] * std::log(cond[y] / marg[y]);
        if (x != y) distortion += px[x] * cond[y];
      }
    }
  };

  double lo = 0.0;
  double hi = 1.0;
  double rate = 0.0;
  double distortion = 0.0;
  solve(hi, rate, distortion);
  while (distortion > epsilon && hi < 700.0) {
    lo = hi;
    hi *= 2.0;
    solve(hi, rate, distortion);
  }
  for (int step = 0; step < 200 && hi - lo > 1e-13 * hi; ++step) {
    const double mid = 0.5 * (lo + hi);
    solve(mid, rate, distortion);
    if (distortion > epsilon) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.slope = -0.5 * (lo + hi);
  solve(-out.slope, out.rate, out.distortion);
  return out;
}

// ---------------------------------------------------------------- exponential law

LambdaFit lambda_fit(std::span<const double> times, std::span<const std::uint8_t> censored, const Estimate& p_hat) {
  if (times.size() != censored.size()) throw ArgumentError("times and censoring flags differ in length");
  if (!(p_hat.value > 0.0)) throw ArgumentError("ball probability estimate must be positive");
  LambdaFit fit;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0.0)) throw ArgumentError("hitting times must be positive");
    fit.exposure += times[i];
    if (censored[i]) {
      ++fit.censored;
    } else {
      ++fit.uncensored;
    }
  }
  if (fit.uncensored == 0) throw EstimationError("every replica is censored; raise L_max");
  if (fit.uncensored < kMinUncensoredHits) {
    throw ArgumentError("lambda_fit needs at least " + std::to_string(kMinUncensoredHits) + " uncensored hits");
  }
  const auto hits = static_cast<double>(fit.uncensored);
  const double lambda = hits / (p_hat.value * fit.exposure);
  const double rel_p = p_hat.std_error / p_hat.value;
  const double se = lambda * std::sqrt(1.0 / hits + rel_p * rel_p);
  fit.lambda = Estimate::monte_carlo(lambda, se, static_cast<std::int64_t>(times.size()), p_hat.seed);
  return fit;
}

namespace {

void split_hits(std::span<const HitResult> hits, std::vector<double>& times, std::vector<std::uint8_t>& censored) {
  times.reserve(hits.size());
  censored.reserve(hits.size());
  for (const HitResult& h : hits) {
    times.push_back(static_cast<double>(h.volume));
    censored.push_back(h.hit() ? 0 : 1);
  }
}

}  // namespace

LambdaFit lambda_fit(std::span<const HitResult> hits, const Estimate& p_hat) {
  std::vector<double> times;
  std::vector<std::uint8_t> censored;
  split_hits(hits, times, censored);
  return lambda_fit(times, censored, p_hat);
}

SurvivalCurve survival_curve(std::span<const double> times, std::span<const std::uint8_t> censored,
                             double rescale) {
  if (times.size() != censored.size()) throw ArgumentError("times and censoring flags differ in length");
  if (!(rescale > 0.0)) throw ArgumentError("rescale factor must be positive");
  SurvivalCurve curve;
  curve.rescale = rescale;
  curve.total = static_cast<std::int64_t>(times.size());
  curve.cap = std::numeric_limits<double>::infinity();
  std::vector<double> observed;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double s = times[i] * rescale;
    if (censored[i]) {
      ++curve.censored;
      curve.cap = std::min(curve.cap, s);
    } else {
      observed.push_back(s);
    }
  }
  std::sort(observed.begin(), observed.end());
  const auto total = static_cast<double>(curve.total);
  std::size_t i = 0;
  while (i < observed.size()) {
    std::size_t j = i;
    while (j < observed.size() && observed[j] == observed[i]) ++j;
    curve.times.push_back(observed[i]);
    curve.survival.push_back(1.0 - static_cast<double>(j) / total);
    i = j;
  }
  return curve;
}

SurvivalCurve survival_curve(std::span<const HitResult> hits, double rescale) {
  std::vector<double> times;
  std::vector<std::uint8_t> censored;
  split_hits(hits, times, censored);
  return survival_curve(times, censored, rescale);
}

double ks_exponential(const SurvivalCurve& curve) {
  if (curve.total == 0 || curve.times.empty()) throw ArgumentError("KS distance needs at least one uncensored time");
  auto exp_cdf = [](double s) { return -std::expm1(-s); };
  double d = 0.0;
  double before = 0.0;  // empirical CDF just below the current time
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    if (curve.times[i] >= curve.cap) break;
    const double g = exp_cdf(curve.times[i]);
    const double after = 1.0 - curve.survival[i];
    d = std::max({d, std::abs(before - g), std::abs(after - g)});
    before = after;
  }
  if (std::isfinite(curve.cap)) d = std::max(d, std::abs(before - exp_cdf(curve.cap)));
  return d;
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw ArgumentError("KS distance needs at least one observation");
  std::sort(samples.begin(), samples.end());
  const auto total = static_cast<double>(samples.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < samples.size()) {
    std::size_t j = i;
    while (j < samples.size() && samples[j] == samples[i]) ++j;
    const double g = cdf(samples[i]);
    d = std::max({d, std::abs(static_cast<double>(i) / total - g), std::abs(static_cast<double>(j) / total - g)});
    i = j;
  }
  return d;
}

// ---------------------------------------------------------------- Rényi functional and moments

Estimate renyi_functional(double q, const FieldModel& p_model, const FieldModel& q_model, const Cube& cube,
                          const DistortionSpec& spec, double alpha, EnumerationMode mode, std::int64_t replicas,
                          const SeedSpec& seed) {
  p_model.validate();
  q_model.validate();
  const GoodnessParams params(std::min(spec.epsilon(), std::nextafter(1.0, 0.0)), alpha, cube);
  if (q == 0.0) return Estimate::exact(0.0);
  const std::int64_t threshold = spec.threshold(cube);
  if (threshold >= cube.sites()) return Estimate::exact(0.0);
  const auto sites = static_cast<double>(cube.sites());

  std::vector<Pattern> reference;
  if (!p_model.is_product()) reference = draw_reference(p_model, cube, replicas, seed.child(kTagField));
  auto ball = [&](const Pattern& a) {
    if (p_model.is_product()) return product_ball(p_model.p, cube, a.grid().count_ones(), threshold);
    return reference_ball(reference, a, threshold);
  };
  auto power = [&](double b) {
    if (b <= 0.0 && q < 0.0) throw EstimationError("ball probability estimate is 0 at negative q; raise replicas");
    return std::pow(b, q);
  };

  if (mode == EnumerationMode::exact) {
    const GoodSet good = enumerate_good(q_model, params);
    double acc = 0.0;
    for (std::size_t i = 0; i < good.index.size(); ++i) {
      acc += good.weight[i] * power(ball(pattern_from_index(cube, good.index[i])));
    }
    const double value = std::log(acc / good.total) / sites;
    if (p_model.is_product()) return Estimate::exact(value);
    return Estimate::monte_carlo(value, 0.0, replicas, seed);
  }

  require_replicas(replicas);
  const SeedSpec pattern_seed = seed.child(kTagPattern);
  std::vector<double> terms(static_cast<std::size_t>(replicas), 0.0);
  std::vector<std::uint8_t> accepted(static_cast<std::size_t>(replicas), 0);
  parallel_for(replicas, [&](std::int64_t r) {
    const Pattern a = sample_pattern(q_model, cube, pattern_seed.with_replica(static_cast<std::uint64_t>(r)));
    if (!params.vacuous() && !is_good(a, params)) return;
    accepted[static_cast<std::size_t>(r)] = 1;
    terms[static_cast<std::size_t>(r)] = power(ball(a));
  });
  std::vector<double> kept;
  for (std::size_t r = 0; r < terms.size(); ++r) {
    if (accepted[r]) kept.push_back(terms[r]);
  }
  if (kept.empty()) throw EstimationError("no sampled pattern was good; conditioning on G_n failed");
  const double mean = mean_of(kept);
  const double se = sd_of(kept, mean) / std::sqrt(static_cast<double>(kept.size()));
  return Estimate::monte_carlo(std::log(mean) / sites, se / (mean * sites), replicas, seed);
}

MomentRatio moment_ratio(double q, const FieldModel& p_model, const FieldModel& q_model, const Cube& cube,
                         const DistortionSpec& spec, double alpha, std::int64_t replicas, std::int64_t l_max,
                         const SeedSpec& seed) {
  p_model.validate();
  q_model.validate();
  require_replicas(replicas, 100);
  if (l_max < cube.n()) throw ArgumentError("L_max must be at least n");
  const GoodnessParams params(std::min(spec.epsilon(), std::nextafter(1.0, 0.0)), alpha, cube);
  MomentRatio out;
  if (q == 0.0) {
    out.lhs = Estimate::exact(1.0);
    out.rhs = Estimate::exact(1.0);
    return out;
  }

  // rhs: ∫ P([ω]^ε)^{-q} dQ_G for q >= −1, ∫ P([ω]^ε) dQ_G below.
  const double exponent = q >= -1.0 ? -q : 1.0;
  const std::int64_t threshold = spec.threshold(cube);
  if (p_model.is_product() && q_model.is_product() && cube.sites() <= kRenyiExactCap) {
    const GoodSet good = enumerate_good(q_model, params);
    double acc = 0.0;
    for (std::size_t i = 0; i < good.index.size(); ++i) {
      const double b = product_ball(p_model.p, cube, std::popcount(good.index[i]), threshold);
      acc += good.weight[i] * std::pow(b, exponent);
    }
    out.rhs = Estimate::exact(acc / good.total);
  } else {
    const Estimate rate = renyi_functional(exponent, p_model, q_model, cube, spec, alpha,
                                           EnumerationMode::monte_carlo, replicas, seed.child(0x53));
    const double v = std::exp(rate.value * static_cast<double>(cube.sites()));
    out.rhs = Estimate::monte_carlo(v, v * rate.std_error * static_cast<double>(cube.sites()), replicas,
                                    seed.child(0x53));
  }

  // lhs: W^q with ω ~ Q conditioned on G_n and σ ~ P.
  const SeedSpec pattern_seed = seed.child(kTagPattern);
  const SeedSpec field_seed = seed.child(kTagField);
  std::vector<double> terms(static_cast<std::size_t>(replicas), 0.0);
  std::vector<std::uint8_t> censored(static_cast<std::size_t>(replicas), 0);
  parallel_for(replicas, [&](std::int64_t r) {
    const auto rep = static_cast<std::uint64_t>(r);
    const Pattern a = draw_good_pattern(q_model, params, pattern_seed.child(rep));
    auto source = make_source(p_model, cube.dim(), field_seed.with_replica(rep), l_max);
    const HitResult hit = hitting_time(*source, a, spec, l_max);
    censored[static_cast<std::size_t>(r)] = hit.hit() ? 0 : 1;
    terms[static_cast<std::size_t>(r)] = std::pow(static_cast<double>(hit.volume), q);
  });
  const auto n_censored = std::accumulate(censored.begin(), censored.end(), std::int64_t{0});
  out.censored_fraction = static_cast<double>(n_censored) / static_cast<double>(replicas);
  if (out.censored_fraction > kMaxCensoredFraction) {
    throw EstimationError("censored fraction " + std::to_string(out.censored_fraction) +
                          " exceeds 1%; raise L_max");
  }
  const double mean = mean_of(terms);
  out.lhs = Estimate::monte_carlo(mean, sd_of(terms, mean) / std::sqrt(static_cast<double>(replicas)), replicas,
                                  seed);
  out.ratio = std::max(out.lhs.value / out.rhs.value, out.rhs.value / out.lhs.value);
  return out;
}

}  // namespace apm
