// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "apmatch/erdosrenyi.hpp"
#include "apmatch/estimators.hpp"
#include "apmatch/experiments.hpp"
#include "apmatch/goodness.hpp"
#include "apmatch/matching.hpp"
#include "oracles.hpp"

using namespace apm;
using json = nlohmann::json;
using Rational = boost::multiprecision::cpp_rational;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

ExperimentConfig config_from(const std::string& text) {
  const ConfigValidation v = validate_config(text);
  if (!v.ok()) throw std::runtime_error("bad acceptance config: " + v.errors.front().format());
  return *v.config;
}

json summary_of(const ExperimentReport& r) { return json::parse(r.files.front().content); }

// Small cubes with at most `max_sites` sites in dimensions 1..3.
std::vector<Cube> small_cubes(std::int64_t max_sites) {
  std::vector<Cube> out;
  for (int d = 1; d <= 3; ++d) {
    for (std::int64_t n = 0;; ++n) {
      const Cube c(n, d);
      if (c.sites() > max_sites) break;
      if (d == 1 || n > 0) out.push_back(c);
    }
  }
  return out;
}

Outcome exact_ball_probabilities() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1001);
  int cases = 0;
  int mismatches = 0;
  double worst = 0.0;
  for (const Cube& cube : small_cubes(16)) {
    for (int t = 0; t < 4; ++t) {
      const auto sites = cube.sites();
      const Pattern a = pattern_from_index(cube, rng.below(std::uint64_t{1} << sites));
      const auto values = oracle::values_of(a);
      const std::int64_t ones = a.grid().count_ones();
      for (int pi : {3, 5, 7}) {
        const Rational p(pi, 10);
        for (double eps : {0.0, 0.1, 0.2, 1.0}) {
          const DistortionSpec spec(eps);
          const std::int64_t e = spec.threshold(cube);
          const Rational want = oracle::ball_probability<Rational>(values, p, e);
          const Rational got = ball_probability_product<Rational>(p, sites - ones, ones, e);
          const double lib = ball_probability_exact(FieldModel::bernoulli(pi / 10.0), a, spec).value;
          const double ref = static_cast<double>(want);
          worst = std::max(worst, std::abs(lib - ref) / ref);
          ++cases;
          mismatches += got != want || std::abs(lib - ref) > 1e-12 * ref;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0,
          std::to_string(cases) + " cases, rational mismatches " + std::to_string(mismatches) +
              ", worst double rel. error " + fmt(worst, 3) + ", " + fmt(secs, 3) + " s"};
}

Outcome goodness_reduction() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1002);
  int cases = 0;
  int good = 0;
  int disagreements = 0;
  for (const Cube& cube : small_cubes(12)) {
    for (int t = 0; t < 50; ++t) {
      const Pattern a = pattern_from_index(cube, rng.below(std::uint64_t{1} << cube.sites()));
      const double eps = 0.25 * rng.uniform();
      const double alpha = t % 2 == 0 ? 0.4 : 0.5;
      const GoodnessParams params(eps, alpha, cube);
      const bool fast = is_good(a, params);
      const bool slow = oracle::is_good_bruteforce(oracle::values_of(a), cube.n(), cube.dim(), params.threshold(),
                                                   std::min(params.max_shift(), cube.n()));
      ++cases;
      good += fast;
      disagreements += fast != slow;
    }
  }
  const double secs = seconds_since(t0);
  return {disagreements == 0 && secs < 60.0,
          std::to_string(cases) + " patterns (" + std::to_string(good) + " good), disagreements " +
              std::to_string(disagreements) + ", " + fmt(secs, 3) + " s"};
}

Outcome exponential_law() {
  const auto t0 = std::chrono::steady_clock::now();
  const json s = summary_of(run_experiment(config_from(
      "kind = survival\nmodel_p = bernoulli(p=0.5)\nmodel_q = bernoulli(p=0.5)\nd = 2\nn = 4\nepsilon = 0.05\n"
      "alpha = 0.4\nreplicas = 10000\nseed = 3\npattern = good\n")));
  const auto& r = s["results"];
  const double ks = r["ks_distance"];
  const double lambda = r["lambda"]["value"];
  const double se = r["lambda"]["std_error"];
  const double censored = r["censored_fraction"];
  const bool good = r["pattern_good"];
  const double secs = seconds_since(t0);
  const bool pass = good && censored < 0.01 && ks <= 0.03 && lambda > 0.0 && lambda <= 2.0 + 3.0 * se && secs < 600.0;
  return {pass, "KS " + fmt(ks) + ", lambda " + fmt(lambda) + " +- " + fmt(se, 2) + ", censored " + fmt(censored) +
                    ", l_max " + std::to_string(r["l_max"].get<std::int64_t>()) + ", " + fmt(secs, 3) + " s"};
}

Outcome negative_control() {
  const json s = summary_of(run_experiment(config_from(
      "kind = survival\nmodel_p = ising(beta=0.3,h=0)\nd = 2\nn = 3\nepsilon = 0.05\nalpha = 0.4\n"
      "pattern = zeros\nreplicas = 2000\nseed = 4\n")));
  const auto& r = s["results"];
  const bool good = r["pattern_good"];
  return {!good && r.contains("ks_distance"),
          "report only: all-zeros pattern good=" + std::string(good ? "yes" : "no") + ", KS " +
              fmt(r["ks_distance"].get<double>()) + ", lambda " + fmt(r["lambda"]["value"].get<double>()) +
              ", censored " + fmt(r["censored_fraction"].get<double>())};
}

Outcome walk_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  int cases = 0;
  int failures = 0;
  for (double eps : {0.0, 0.1, 0.25}) {
    for (std::int64_t n = 0; n + 1 <= 18; ++n) {
      for (std::int64_t k = 0; n + k + 1 <= 18; ++k) {
        ++cases;
        failures += !walk_hitting_identity_check(n, k, eps).equal();
      }
    }
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < 300.0, std::to_string(cases) + " (n, k_n, eps) triples, unequal " +
                                             std::to_string(failures) + ", " + fmt(secs, 3) + " s"};
}

Outcome bad_pattern() {
  const BadPatternReport r = bad_pattern_nontriviality(12, 0.1, 10000, SeedSpec{6});
  const bool k_ok = r.k_n == static_cast<std::int64_t>(std::llround(1.0 / r.ball_probability));
  const double lo = r.estimate.value - 3.0 * r.estimate.std_error;
  const double hi = r.estimate.value + 3.0 * r.estimate.std_error;
  return {k_ok && lo > 0.0 && hi < 1.0, "k_n " + std::to_string(r.k_n) + ", P(T <= k_n) " + fmt(r.estimate.value) +
                                            ", 3SE band [" + fmt(lo) + ", " + fmt(hi) + "]"};
}

Outcome rate_distortion() {
  const json s = summary_of(run_experiment(config_from(
      "kind = rd\nmodel_p = bernoulli(p=0.5)\nd = 1\nn_values = 8, 99, 399\nepsilon = 0.2\npattern = random\nseed = 7\n")));
  const auto& rows = s["results"]["rates"];
  std::string values;
  for (const auto& row : rows) values += (values.empty() ? "" : ", ") + fmt(row["rate"]["value"].get<double>());
  const double limit = s["results"]["limit"];
  const double gap = s["results"]["gap_at_largest_n"];
  const double ba = s["results"]["blahut_arimoto"]["rate"];
  const bool pass = s["checks"]["approaches_limit_monotonically"] == true && std::abs(gap) < 0.05 &&
                    std::abs(ba - limit) < 1e-6;
  return {pass, "R(N=9,100,400) = " + values + ", limit " + fmt(limit, 6) + ", BA gap " + fmt(std::abs(ba - limit), 2)};
}

Outcome lln_envelope() {
  const double eps = 0.1;
  const FieldModel fair = FieldModel::bernoulli(0.5);
  const SeedSpec root{8};
  std::vector<double> gaps;
  std::string detail;
  for (std::int64_t n : {3, 5, 7}) {
    const Cube cube(n, 1);
    const DistortionSpec spec(eps);
    const SeedSpec seed = root.child(static_cast<std::uint64_t>(n));
    const Pattern first = sample_pattern(fair, cube, seed.child(1));
    const double rate = rd_aep(fair, first, spec, 0, seed.child(2)).value;
    const double ball = ball_probability_exact(fair, first, spec).value;
    const auto l_max = static_cast<std::int64_t>(std::ceil(60.0 / ball));
    std::vector<double> logs;
    int censored = 0;
    for (std::uint64_t r = 0; r < 200; ++r) {
      const Pattern omega = sample_pattern(fair, cube, seed.child(1).with_replica(r));
      LazyBernoulliSource sigma(0.5, 1, seed.child(3).with_replica(r), l_max + 1);
      const HitResult h = hitting_time(sigma, omega, spec, l_max);
      censored += !h.hit();
      logs.push_back(std::log(static_cast<double>(h.volume)) / static_cast<double>(cube.sites()));
    }
    std::nth_element(logs.begin(), logs.begin() + 100, logs.end());
    const double upper = logs[100];
    std::nth_element(logs.begin(), logs.begin() + 99, logs.end());
    const double median = 0.5 * (upper + logs[99]);
    gaps.push_back(median - rate);
    detail += (detail.empty() ? "" : ", ") + std::string("n=") + std::to_string(n) + ": " + fmt(median - rate) +
              (censored ? " (" + std::to_string(censored) + " censored)" : "");
  }
  const bool shrinking = std::abs(gaps[1]) < std::abs(gaps[0]) && std::abs(gaps[2]) < std::abs(gaps[1]);
  return {shrinking && std::abs(gaps[2]) < 0.1,
          "median gap " + detail + "; magnitude shrinking " + (shrinking ? "yes" : "no")};
}

Outcome goodness_typicality() {
  const Estimate small = goodness_fraction(FieldModel::bernoulli(0.5), GoodnessParams(0.0, 0.5, Cube(3, 1)), 1,
                                           SeedSpec{9}, FractionMode::exact);
  const bool exact_ok = small.value == 14.0 / 16.0;
  std::vector<Estimate> f;
  std::string values;
  for (std::int64_t n : {3, 6, 9}) {
    f.push_back(goodness_fraction(FieldModel::bernoulli(0.5), GoodnessParams(0.02, 0.4, Cube(n, 2)), 20000,
                                  SeedSpec{9}.child(static_cast<std::uint64_t>(n)), FractionMode::monte_carlo));
    values += (values.empty() ? "" : ", ") + fmt(f.back().value) + " +- " + fmt(f.back().std_error, 2);
  }
  bool nondecreasing = true;
  for (std::size_t i = 1; i < f.size(); ++i) {
    const double se = std::hypot(f[i].std_error, f[i - 1].std_error);
    nondecreasing = nondecreasing && f[i].value >= f[i - 1].value - 2.0 * se;
  }
  return {exact_ok && nondecreasing && f.back().value > 0.99,
          "d=1 n=3 fraction " + fmt(small.value) + "; d=2 n=3,6,9: " + values};
}

Outcome renyi() {
  const FieldModel fair = FieldModel::bernoulli(0.5);
  const Estimate one =
      renyi_functional(1.0, fair, fair, Cube(3, 1), DistortionSpec(0.0), 0.5, EnumerationMode::exact, 100, SeedSpec{10});
  const bool one_ok = one.method == Method::exact && std::abs(one.value + std::log(2.0)) < 1e-12;
  int zero_cases = 0;
  int zero_failures = 0;
  const std::vector<FieldModel> models{fair, FieldModel::bernoulli(0.3), FieldModel::ising(0.2, 0.1, 30)};
  for (const auto& p : models) {
    for (const auto& q : models) {
      for (int d = 1; d <= 2; ++d) {
        for (double eps : {0.0, 0.1, 0.3}) {
          for (auto mode : {EnumerationMode::exact, EnumerationMode::monte_carlo}) {
            if (mode == EnumerationMode::exact && !q.is_product()) continue;
            ++zero_cases;
            try {
              const Estimate e =
                  renyi_functional(0.0, p, q, Cube(d == 1 ? 4 : 2, d), DistortionSpec(eps), 0.5, mode, 50, SeedSpec{10});
              zero_failures += e.value != 0.0;
            } catch (const std::exception&) {
              ++zero_failures;
            }
          }
        }
      }
    }
  }
  return {one_ok && zero_failures == 0, "q=1 value " + fmt(one.value, 15) + " (-ln 2 = " + fmt(-std::log(2.0), 15) +
                                            "); q=0 zero in " + std::to_string(zero_cases - zero_failures) + "/" +
                                            std::to_string(zero_cases) + " configurations"};
}

Outcome moments() {
  const json s = summary_of(run_experiment(config_from(
      "kind = moments\nd = 1\nn_values = 3, 4, 5\nepsilon = 0\nalpha = 0.5\nq_values = -0.5, 0, 1\n"
      "replicas = 10000\nseed = 11\n")));
  double worst = 0.0;
  bool exact_rhs = true;
  for (const auto& row : s["results"]["moments"]) {
    worst = std::max(worst, row["ratio"].get<double>());
    exact_rhs = exact_rhs && row["rhs"]["method"] == "exact";
  }
  return {exact_rhs && worst <= 10.0, std::to_string(s["results"]["moments"].size()) +
                                          " (n, q) pairs, largest ratio " + fmt(worst)};
}

Outcome reproducibility() {
  const std::vector<std::string> configs{
      "kind = sample\nmodel_p = ising(beta=0.3,h=0,sweeps=30)\nd = 2\nn = 15\ndistance = 3\nreplicas = 6\n",
      "kind = goodness\nd = 2\nn_values = 3, 6\nepsilon = 0.02\nmode = mc\nreplicas = 2000\npattern = random\n",
      "kind = survival\nd = 2\nn = 3\nepsilon = 0.05\nreplicas = 500\nseed = 12\n",
      "kind = survival\nmodel_p = ising(beta=0.25,h=0,sweeps=20)\nd = 2\nn = 2\nepsilon = 0.1\nalpha = 0.5\n"
      "pattern = random\nreplicas = 200\nl_max = 12\n",
      "kind = rd\nn_values = 8, 30\nepsilon = 0.2\npattern = random\n",
      "kind = rd\nmodel_p = ising(beta=0.2,h=0,sweeps=20)\nd = 1\nn = 6\nepsilon = 0.2\nreplicas = 300\npattern = random\n",
      "kind = renyi\nd = 1\nn_values = 3, 5\nepsilon = 0.1\nq_values = -0.5, 1, 2\nmode = mc\nreplicas = 500\n",
      "kind = moments\nd = 1\nn = 3\nepsilon = 0\nalpha = 0.5\nq_values = -0.5, 1\nreplicas = 300\n",
      "kind = erdos-renyi\ntask = bad-pattern\nn = 8\nepsilon = 0.1\nreplicas = 1000\n",
      "kind = erdos-renyi\ntask = gumbel\nn = 10\nk_values = 2000\nreplicas = 1000\n",
  };
  int files = 0;
  int differing = 0;
  for (const auto& text : configs) {
    const ExperimentConfig c = config_from(text);
    const ExperimentReport a = run_experiment(c);
    setenv("APMATCH_THREADS", "3", 1);
    const ExperimentReport b = run_experiment(c);
    unsetenv("APMATCH_THREADS");
    const ExperimentReport again = run_experiment(c);
    if (a.files.size() != b.files.size() || a.files.size() != again.files.size()) {
      ++differing;
      continue;
    }
    for (std::size_t i = 0; i < a.files.size(); ++i) {
      ++files;
      differing += a.files[i].content != b.files[i].content || a.files[i].content != again.files[i].content;
    }
  }
  return {differing == 0, std::to_string(configs.size()) + " configs, " + std::to_string(files) +
                              " report files compared across reruns and thread counts, differing " +
                              std::to_string(differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exact ball probabilities", exact_ball_probabilities},
      {"goodness reduction", goodness_reduction},
      {"exponential law of hitting times", exponential_law},
      {"negative control (not good, Ising)", negative_control},
      {"random-walk identity", walk_identity},
      {"bad-pattern nontriviality", bad_pattern},
      {"rate-distortion", rate_distortion},
      {"LLN envelope", lln_envelope},
      {"goodness typicality", goodness_typicality},
      {"Renyi functional", renyi},
      {"moment ratios", moments},
      {"reproducibility", reproducibility},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
