#include "apmatch/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "apmatch/erdosrenyi.hpp"
#include "apmatch/errors.hpp"
#include "apmatch/estimators.hpp"
#include "apmatch/format.hpp"
#include "apmatch/goodness.hpp"
#include "apmatch/matching.hpp"
#include "apmatch/parallel.hpp"

namespace apm {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kAutoCapFactor = 10.0;
constexpr double kMaxAutoVolume = 8.0e9;

struct KindName {
  ExperimentKind kind;
  const char* name;
};
constexpr KindName kKinds[] = {
    {ExperimentKind::sample, "sample"},   {ExperimentKind::goodness, "goodness"},
    {ExperimentKind::survival, "survival"}, {ExperimentKind::rd, "rd"},
    {ExperimentKind::renyi, "renyi"},     {ExperimentKind::moments, "moments"},
    {ExperimentKind::erdos_renyi, "erdos-renyi"},
};

// ---------------------------------------------------------------- value parsing

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) throw ArgumentError("expected a number, got '" + s + "'");
  return v;
}

std::int64_t to_int(const std::string& s) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw ArgumentError("expected an integer, got '" + s + "'");
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw ArgumentError("expected a nonnegative integer, got '" + s + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> items;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

template <typename T, typename Fn>
std::vector<T> parse_list(const std::string& s, Fn&& convert) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) out.push_back(convert(item));
  return out;
}

template <typename T, typename Fn>
std::string join(const std::vector<T>& values, Fn&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += fmt(values[i]);
  }
  return out;
}

void expect_choice(const std::string& v, std::initializer_list<const char*> choices) {
  for (const char* c : choices) {
    if (v == c) return;
  }
  std::string msg = "expected one of";
  for (const char* c : choices) msg += std::string(" ") + c;
  throw ArgumentError(msg + ", got '" + v + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"kind",
       [](ExperimentConfig& c, const std::string& v) {
         auto k = parse_experiment_kind(v);
         if (!k) throw ArgumentError("unknown experiment kind '" + v + "'");
         c.kind = *k;
       }},
      {"model_p", [](ExperimentConfig& c, const std::string& v) { c.model_p = FieldModel::parse(v); }},
      {"model_q", [](ExperimentConfig& c, const std::string& v) { c.model_q = FieldModel::parse(v); }},
      {"d", [](ExperimentConfig& c, const std::string& v) { c.d = static_cast<int>(to_int(v)); }},
      {"n", [](ExperimentConfig& c, const std::string& v) { c.n = to_int(v); }},
      {"epsilon", [](ExperimentConfig& c, const std::string& v) { c.epsilon = to_double(v); }},
      {"alpha", [](ExperimentConfig& c, const std::string& v) { c.alpha = to_double(v); }},
      {"replicas", [](ExperimentConfig& c, const std::string& v) { c.replicas = to_int(v); }},
      {"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = to_uint(v); }},
      {"l_max", [](ExperimentConfig& c, const std::string& v) { c.l_max = v == "auto" ? -1 : to_int(v); }},
      {"sweeps", [](ExperimentConfig& c, const std::string& v) { c.sweeps = to_int(v); }},
      {"output", [](ExperimentConfig& c, const std::string& v) { c.output = v; }},
      {"q_values", [](ExperimentConfig& c, const std::string& v) { c.q_values = parse_list<double>(v, to_double); }},
      {"n_values", [](ExperimentConfig& c, const std::string& v) { c.n_values = parse_list<std::int64_t>(v, to_int); }},
      {"k_values", [](ExperimentConfig& c, const std::string& v) { c.k_values = parse_list<double>(v, to_double); }},
      {"mode",
       [](ExperimentConfig& c, const std::string& v) {
         expect_choice(v, {"auto", "exact", "mc"});
         c.mode = v;
       }},
      {"pattern",
       [](ExperimentConfig& c, const std::string& v) {
         expect_choice(v, {"good", "random", "zeros", "ones", "checkerboard"});
         c.pattern = v;
       }},
      {"task",
       [](ExperimentConfig& c, const std::string& v) {
         expect_choice(v, {"identity", "fit", "bad-pattern", "gumbel"});
         c.task = v;
       }},
      {"distance", [](ExperimentConfig& c, const std::string& v) { c.distance = to_int(v); }},
      {"epsilon0", [](ExperimentConfig& c, const std::string& v) { c.epsilon0 = to_double(v); }},
  };
  return table;
}

struct Located {
  std::string value;
  int line;
};

void range_checks(const ExperimentConfig& c, const std::map<std::string, Located>& seen, ConfigValidation& out) {
  auto line_of = [&](const std::string& key) {
    auto it = seen.find(key);
    return it == seen.end() ? 0 : it->second.line;
  };
  auto error = [&](const std::string& key, const std::string& msg) {
    out.errors.push_back({line_of(key), key, msg});
  };
  auto warn = [&](const std::string& key, const std::string& msg) {
    out.warnings.push_back({line_of(key), key, msg});
  };
  if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0)) error("epsilon", "must lie in [0,1]");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) error("alpha", "must lie in (0,1)");
  if (c.d < 1 || c.d > kMaxDim) error("d", "must be 1, 2 or 3");
  if (c.n < 0) error("n", "must be nonnegative");
  for (auto v : c.n_values) {
    if (v < 0) error("n_values", "sizes must be nonnegative");
  }
  if (c.replicas < 1) error("replicas", "must be at least 1");
  if (c.sweeps < 1) error("sweeps", "must be at least 1");
  if (c.distance < 1) error("distance", "must be at least 1");
  if (c.epsilon0 < 0.0) error("epsilon0", "must be nonnegative");
  std::int64_t largest_n = c.n;
  for (auto v : c.n_values) largest_n = std::max(largest_n, v);
  if (c.l_max != -1 && c.l_max < largest_n) error("l_max", "must be at least n (" + std::to_string(largest_n) + ")");
  if (c.q_values.empty() && (c.kind == ExperimentKind::renyi || c.kind == ExperimentKind::moments)) {
    error("q_values", "needs at least one value");
  }
  const bool goodness_needed =
      c.kind == ExperimentKind::goodness || (c.kind == ExperimentKind::survival && c.pattern == "good") ||
      c.kind == ExperimentKind::renyi || c.kind == ExperimentKind::moments;
  if (goodness_needed && c.epsilon == 1.0) error("epsilon", "must be below 1 when goodness is tested");
  if (c.kind == ExperimentKind::moments && c.replicas < 100) error("replicas", "moments need at least 100");
  if (c.kind == ExperimentKind::erdos_renyi) {
    if (c.d != 1) error("d", "erdos-renyi experiments are one-dimensional");
    if (!(c.model_p == FieldModel::bernoulli(0.5))) error("model_p", "erdos-renyi experiments need bernoulli(p=0.5)");
    if (c.task == "fit" && c.k_values.empty()) error("k_values", "the fit needs a k grid");
    if (c.task == "identity" && c.k_values.empty()) error("k_values", "the identity check needs k values");
  }
  for (const char* key : {"model_p", "model_q"}) {
    const FieldModel& m = std::string(key) == "model_p" ? c.model_p : c.model_q;
    if (m.kind == ModelKind::ising && c.d >= 1 && c.d <= kMaxDim && !in_mixing_allowlist(m, c.d)) {
      warn(key, "outside high-temperature allowlist (beta=" + format_number(m.beta) + ", d=" +
                    std::to_string(c.d) + ")");
    }
  }
  if (c.epsilon0 > 0.0 && c.epsilon / c.alpha >= c.epsilon0) {
    warn("epsilon0", "epsilon/alpha = " + format_number(c.epsilon / c.alpha) + " is not below the declared epsilon0 " +
                         format_number(c.epsilon0));
  }
}

// ---------------------------------------------------------------- report helpers

json estimate_json(const Estimate& e) {
  json j;
  j["value"] = e.value;
  j["std_error"] = e.std_error;
  j["replicas"] = e.replicas;
  j["method"] = to_string(e.method);
  if (e.method == Method::monte_carlo) j["seed"] = {{"master", e.seed.master}, {"generator", e.seed.generator}};
  return j;
}

class Table {
 public:
  Table(std::string schema, std::vector<std::string> columns) : schema_(std::move(schema)) {
    text_ = "#schema=" + schema_ + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) text_ += (i ? "," : "") + columns[i];
    text_ += "\n";
  }
  Table& cell(const std::string& v) {
    if (!row_open_) {
      row_open_ = true;
    } else {
      text_ += ",";
    }
    text_ += v;
    return *this;
  }
  Table& cell(double v) { return cell(format_number(v)); }
  Table& cell(std::int64_t v) { return cell(std::to_string(v)); }
  void end_row() {
    text_ += "\n";
    row_open_ = false;
  }
  [[nodiscard]] const std::string& text() const { return text_; }

 private:
  std::string schema_;
  std::string text_;
  bool row_open_ = false;
};

struct Run {
  const ExperimentConfig& config;
  SeedSpec root;
  json results = json::object();
  json checks = json::object();
  std::vector<std::string> warnings;
  std::vector<ReportFile> extra;

  explicit Run(const ExperimentConfig& c) : config(c), root{c.seed, 0, std::string(kGeneratorId)} {}

  [[nodiscard]] std::vector<std::int64_t> sizes() const {
    return config.n_values.empty() ? std::vector<std::int64_t>{config.n} : config.n_values;
  }
};

Pattern choose_pattern(const ExperimentConfig& c, const Cube& cube, const SeedSpec& seed) {
  if (c.pattern == "zeros") return Pattern::constant(cube, false);
  if (c.pattern == "ones") return Pattern::constant(cube, true);
  if (c.pattern == "checkerboard") return Pattern::checkerboard(cube);
  if (c.pattern == "random") return sample_pattern(c.model_q, cube, seed);
  return draw_good_pattern(c.model_q, GoodnessParams(c.epsilon, c.alpha, cube), seed);
}

std::int64_t auto_l_max(double ball, const Cube& cube) {
  const double volume = kAutoCapFactor / ball;
  if (!(volume < kMaxAutoVolume)) {
    throw EstimationError("ball probability " + format_number(ball) + " needs a search volume above " +
                          format_number(kMaxAutoVolume) + "; set l_max explicitly");
  }
  const auto side = static_cast<std::int64_t>(std::ceil(std::pow(volume, 1.0 / cube.dim())));
  return std::max(cube.n(), side - 1);
}

Estimate ball_estimate(const ExperimentConfig& c, const Pattern& a, const DistortionSpec& spec, const SeedSpec& seed) {
  if (c.model_p.is_product()) return ball_probability_exact(c.model_p, a, spec);
  return ball_probability_mc(c.model_p, a, spec, c.replicas, seed);
}

// ---------------------------------------------------------------- experiments

std::string run_sample(Run& run) {
  const auto& c = run.config;
  const Extents window = Extents::cube(c.d, c.n + 1);
  const FieldSample sample = sample_field(c.model_p, window, run.root);
  std::ostringstream text;
  write_text(text, sample);
  run.extra.push_back({"sample.txt", text.str()});
  const auto ones = sample.grid().count_ones();
  run.results["window_side"] = c.n + 1;
  run.results["ones"] = ones;
  run.results["density"] = static_cast<double>(ones) / static_cast<double>(window.volume());
  run.results["in_mixing_allowlist"] = in_mixing_allowlist(c.model_p, c.d);
  run.results["finite_energy_delta"] = finite_energy_delta(c.model_p, c.d);

  Table table("apmatch.sample.correlation.v1", {"distance", "covariance", "std_error", "replicas"});
  json corr = json::array();
  if (c.replicas >= 2) {
    for (std::int64_t m = 1; m <= c.distance && 2 * m < c.n + 1; ++m) {
      const Estimate e = pair_correlation(c.model_p, m, window, c.replicas, run.root.child(static_cast<std::uint64_t>(m)));
      table.cell(m).cell(e.value).cell(e.std_error).cell(e.replicas).end_row();
      corr.push_back({{"distance", m}, {"covariance", estimate_json(e)}});
    }
  } else {
    run.warnings.push_back("pair correlation skipped: needs replicas >= 2");
  }
  run.results["pair_correlation"] = corr;
  return table.text();
}

std::string run_goodness(Run& run) {
  const auto& c = run.config;
  Table table("apmatch.goodness.table.v1",
              {"n", "sites", "max_shift", "threshold", "fraction", "std_error", "method"});
  json rows = json::array();
  const FractionMode mode =
      c.mode == "exact" ? FractionMode::exact : (c.mode == "mc" ? FractionMode::monte_carlo : FractionMode::automatic);
  for (auto n : run.sizes()) {
    const GoodnessParams params(c.epsilon, c.alpha, Cube(n, c.d));
    if (params.vacuous()) run.warnings.push_back("vacuous shift set at n=" + std::to_string(n) + ": floor(alpha*n) = 0");
    const Estimate f = goodness_fraction(c.model_q, params, c.replicas, run.root.child(static_cast<std::uint64_t>(n)), mode);
    table.cell(n).cell(params.cube.sites()).cell(params.max_shift()).cell(params.threshold());
    table.cell(f.value).cell(f.std_error).cell(std::string(to_string(f.method))).end_row();
    rows.push_back({{"n", n}, {"max_shift", params.max_shift()}, {"vacuous", params.vacuous()},
                    {"fraction", estimate_json(f)}});
  }
  run.results["fractions"] = rows;

  // Disagreement profile of one pattern at the configured n; "good" falls back to a plain draw from Q.
  const GoodnessParams params(c.epsilon, c.alpha, Cube(c.n, c.d));
  const Pattern a = c.pattern == "good" ? sample_pattern(c.model_q, params.cube, run.root.child(0x70))
                                        : choose_pattern(c, params.cube, run.root.child(0x70));
  const std::int64_t shift = std::min(params.max_shift(), c.n);
  const DisagreementProfile profile = disagreement_profile(a, shift);
  std::vector<std::string> columns;
  for (int i = 0; i < c.d; ++i) columns.push_back("x" + std::to_string(i));
  for (const char* col : {"disagreement", "overlap", "limit", "pass"}) columns.emplace_back(col);
  Table prof("apmatch.goodness.profile.v1", columns);
  for (const auto& e : profile.entries) {
    for (int i = 0; i < c.d; ++i) prof.cell(e.shift[i]);
    prof.cell(e.disagreement).cell(e.overlap).cell(2 * params.threshold());
    prof.cell(std::string(e.disagreement > 2 * params.threshold() ? "pass" : "fail")).end_row();
  }
  std::ostringstream pattern_text;
  write_text(pattern_text, a);
  run.results["profile_pattern"] = pattern_text.str();
  run.results["profile_pattern_good"] = is_good(a, params);
  run.extra.push_back({"profile.csv", prof.text()});
  return table.text();
}

std::string run_survival(Run& run) {
  const auto& c = run.config;
  const Cube cube(c.n, c.d);
  const DistortionSpec spec(c.epsilon);
  const Pattern a = choose_pattern(c, cube, run.root.child(1));
  const bool good = c.epsilon < 1.0 && is_good(a, GoodnessParams(c.epsilon, c.alpha, cube));
  const Estimate p_hat = ball_estimate(c, a, spec, run.root.child(2));
  if (!(p_hat.value > 0.0)) throw EstimationError("estimated ball probability is 0; raise replicas");
  const std::int64_t l_max = c.l_max >= 0 ? c.l_max : auto_l_max(p_hat.value, cube);

  std::vector<HitResult> hits(static_cast<std::size_t>(c.replicas));
  const SeedSpec field_seed = run.root.child(3);
  const PatternMatcher matcher(a, spec.threshold(cube));
  parallel_for(c.replicas, [&](std::int64_t r) {
    auto source = make_source(c.model_p, c.d, field_seed.with_replica(static_cast<std::uint64_t>(r)), l_max);
    hits[static_cast<std::size_t>(r)] = matcher.first_hit(*source, l_max);
  });

  std::string replicas_csv = "#schema=apmatch.survival.replicas.v1\n" + hit_record_header(c.d) + "\n";
  for (std::size_t r = 0; r < hits.size(); ++r) {
    replicas_csv += format_hit_record(r, hits[r], field_seed.master) + "\n";
  }
  run.extra.push_back({"replicas.csv", replicas_csv});

  const LambdaFit fit = lambda_fit(hits, p_hat);
  const double rescale = fit.lambda.value * p_hat.value;
  const SurvivalCurve curve = survival_curve(hits, rescale);
  const double ks = ks_exponential(curve);
  const double censored_fraction = static_cast<double>(fit.censored) / static_cast<double>(c.replicas);

  std::ostringstream pattern_text;
  write_text(pattern_text, a);
  run.results["pattern"] = pattern_text.str();
  run.results["pattern_good"] = good;
  run.results["threshold"] = spec.threshold(cube);
  run.results["l_max"] = l_max;
  run.results["ball_probability"] = estimate_json(p_hat);
  run.results["lambda"] = estimate_json(fit.lambda);
  run.results["uncensored"] = fit.uncensored;
  run.results["censored"] = fit.censored;
  run.results["censored_fraction"] = censored_fraction;
  run.results["ks_distance"] = ks;
  run.results["rescale"] = rescale;
  run.checks["censoring_below_1pct"] = censored_fraction < 0.01;
  run.checks["ks_at_most_0.03"] = ks <= 0.03;
  run.checks["lambda_within_uniform_bound"] =
      fit.lambda.value > 0.0 && fit.lambda.value <= 2.0 + 3.0 * fit.lambda.std_error;
  if (!good) run.warnings.push_back("pattern is not (epsilon,alpha)-good; the exponential law is not asserted");

  Table table("apmatch.survival.curve.v1", {"s", "empirical_survival", "exponential_survival"});
  table.cell(0.0).cell(1.0).cell(1.0).end_row();
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    table.cell(curve.times[i]).cell(curve.survival[i]).cell(std::exp(-curve.times[i])).end_row();
  }
  return table.text();
}

std::string run_rd(Run& run) {
  const auto& c = run.config;
  const DistortionSpec spec(c.epsilon);
  Table table("apmatch.rd.table.v1", {"n", "sites", "threshold", "rate", "std_error", "method"});
  json rows = json::array();
  for (auto n : run.sizes()) {
    const Cube cube(n, c.d);
    const SeedSpec seed = run.root.child(static_cast<std::uint64_t>(n));
    const Pattern omega = choose_pattern(c, cube, seed.child(1));
    const Estimate r = rd_aep(c.model_p, omega, spec, c.replicas, seed.child(2));
    table.cell(n).cell(cube.sites()).cell(spec.threshold(cube)).cell(r.value).cell(r.std_error);
    table.cell(std::string(to_string(r.method))).end_row();
    rows.push_back({{"n", n}, {"sites", cube.sites()}, {"rate", estimate_json(r)}});
  }
  run.results["rates"] = rows;
  if (rows.size() == 1) {
    run.results["value"] = rows[0]["rate"]["value"];
    run.results["method"] = rows[0]["rate"]["method"];
  }
  if (c.model_p == FieldModel::bernoulli(0.5)) {
    const double limit = std::log(2.0) - binary_entropy(std::min(c.epsilon, 0.5));
    run.results["limit"] = limit;
    if (rows.size() > 1) {
      bool approaching = true;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        const double prev = rows[i - 1]["rate"]["value"].get<double>();
        const double cur = rows[i]["rate"]["value"].get<double>();
        approaching = approaching && std::abs(cur - limit) < std::abs(prev - limit);
      }
      run.checks["approaches_limit_monotonically"] = approaching;
    }
    run.results["gap_at_largest_n"] = rows.back()["rate"]["value"].get<double>() - limit;
    if (c.model_q == FieldModel::bernoulli(0.5) && c.epsilon > 0.0 && c.epsilon < 0.5) {
      const BlahutArimotoResult ba = rd_blahut_arimoto(0.5, c.epsilon);
      run.results["blahut_arimoto"] = {{"rate", ba.rate}, {"distortion", ba.distortion}, {"iterations", ba.iterations}};
      run.checks["blahut_arimoto_matches_closed_form"] = std::abs(ba.rate - limit) < 1e-6;
    }
  }
  return table.text();
}

EnumerationMode renyi_mode(const ExperimentConfig& c, const Cube& cube) {
  if (c.mode == "exact") return EnumerationMode::exact;
  if (c.mode == "mc") return EnumerationMode::monte_carlo;
  return c.model_q.is_product() && cube.sites() <= kRenyiExactCap ? EnumerationMode::exact
                                                                  : EnumerationMode::monte_carlo;
}

std::string run_renyi(Run& run) {
  const auto& c = run.config;
  const DistortionSpec spec(c.epsilon);
  Table table("apmatch.renyi.table.v1", {"n", "q", "value", "std_error", "method"});
  json rows = json::array();
  for (auto n : run.sizes()) {
    const Cube cube(n, c.d);
    for (std::size_t i = 0; i < c.q_values.size(); ++i) {
      const double q = c.q_values[i];
      const SeedSpec seed = run.root.child(static_cast<std::uint64_t>(n)).child(i);
      const Estimate e = renyi_functional(q, c.model_p, c.model_q, cube, spec, c.alpha, renyi_mode(c, cube),
                                          c.replicas, seed);
      table.cell(n).cell(q).cell(e.value).cell(e.std_error).cell(std::string(to_string(e.method))).end_row();
      rows.push_back({{"n", n}, {"q", q}, {"value", estimate_json(e)}});
    }
  }
  run.results["values"] = rows;
  return table.text();
}

std::string run_moments(Run& run) {
  const auto& c = run.config;
  const DistortionSpec spec(c.epsilon);
  Table table("apmatch.moments.table.v1",
              {"n", "q", "lhs", "lhs_std_error", "rhs", "rhs_method", "ratio", "censored_fraction", "l_max"});
  json rows = json::array();
  for (auto n : run.sizes()) {
    const Cube cube(n, c.d);
    std::int64_t l_max = c.l_max;
    if (l_max < 0) {
      if (!c.model_p.is_product()) throw UnsupportedModelError("automatic l_max needs a product law P; set l_max");
      const std::int64_t e = spec.threshold(cube);
      const double weakest = std::min(ball_probability_product(c.model_p.p, cube.sites(), std::int64_t{0}, e),
                                      ball_probability_product(c.model_p.p, std::int64_t{0}, cube.sites(), e));
      l_max = auto_l_max(weakest, cube);
    }
    for (std::size_t i = 0; i < c.q_values.size(); ++i) {
      const double q = c.q_values[i];
      const SeedSpec seed = run.root.child(static_cast<std::uint64_t>(n)).child(i);
      const MomentRatio m = moment_ratio(q, c.model_p, c.model_q, cube, spec, c.alpha, c.replicas, l_max, seed);
      table.cell(n).cell(q).cell(m.lhs.value).cell(m.lhs.std_error).cell(m.rhs.value);
      table.cell(std::string(to_string(m.rhs.method))).cell(m.ratio).cell(m.censored_fraction).cell(l_max).end_row();
      rows.push_back({{"n", n}, {"q", q}, {"lhs", estimate_json(m.lhs)}, {"rhs", estimate_json(m.rhs)},
                      {"ratio", m.ratio}, {"censored_fraction", m.censored_fraction}, {"l_max", l_max}});
    }
  }
  run.results["moments"] = rows;
  return table.text();
}

std::string run_erdos_renyi(Run& run) {
  const auto& c = run.config;
  if (c.task == "identity") {
    Table table("apmatch.er.identity.v1", {"n", "k_n", "epsilon", "length", "lhs_count", "rhs_count", "equal"});
    bool all_equal = true;
    json rows = json::array();
    for (auto n : run.sizes()) {
      for (double k : c.k_values) {
        const auto kn = static_cast<std::int64_t>(k);
        const IdentityCheck chk = walk_hitting_identity_check(n, kn, c.epsilon);
        all_equal = all_equal && chk.equal();
        table.cell(n).cell(kn).cell(c.epsilon).cell(chk.length).cell(static_cast<std::int64_t>(chk.lhs));
        table.cell(static_cast<std::int64_t>(chk.rhs)).cell(std::string(chk.equal() ? "true" : "false")).end_row();
        rows.push_back({{"n", n}, {"k_n", kn}, {"lhs", chk.lhs_probability()}, {"rhs", chk.rhs_probability()},
                        {"equal", chk.equal()}});
      }
    }
    run.results["identity"] = rows;
    run.checks["identity_exact"] = all_equal;
    return table.text();
  }
  if (c.task == "fit") {
    const auto sizes = run.sizes();
    const ErCoefficients fit = fit_er_coefficients(sizes, c.k_values, c.epsilon, c.replicas, run.root);
    Table table("apmatch.er.fit.v1", {"n", "k_empirical", "target", "k_predicted"});
    for (std::size_t i = 0; i < fit.n_values.size(); ++i) {
      table.cell(fit.n_values[i]).cell(fit.k_empirical[i]).cell(fit.target[i]);
      table.cell(predict_kn(fit, fit.n_values[i])).end_row();
    }
    const double u = 1.0 - 2.0 * c.epsilon;
    const double cramer = 0.5 * (1 + u) * std::log1p(u) + (u < 1.0 ? 0.5 * (1 - u) * std::log1p(-u) : 0.0);
    run.results["a"] = fit.a;
    run.results["b"] = fit.b;
    run.results["c"] = fit.c;
    run.results["residual_rms"] = fit.residual;
    run.results["a_per_window_site"] = fit.a / u;
    run.results["cramer_rate"] = cramer;
    run.results["a_reference"] = 1.0 / cramer;
    return table.text();
  }
  if (c.task == "bad-pattern") {
    const BadPatternReport rep = bad_pattern_nontriviality(c.n, c.epsilon, c.replicas, run.root);
    run.results["k_n"] = rep.k_n;
    run.results["ball_probability"] = rep.ball_probability;
    run.results["p_hit_by_k_n"] = estimate_json(rep.estimate);
    run.results["p_low"] = rep.p_low;
    run.results["p_high"] = rep.p_high;
    run.results["degenerate"] = rep.degenerate;
    run.checks["strictly_inside_unit_interval"] = rep.inside;
    Table table("apmatch.er.bad_pattern.v1", {"n", "epsilon", "k_n", "estimate", "std_error", "p_low", "p_high"});
    table.cell(c.n).cell(c.epsilon).cell(rep.k_n).cell(rep.estimate.value).cell(rep.estimate.std_error);
    table.cell(rep.p_low).cell(rep.p_high).end_row();
    return table.text();
  }
  const auto kn = c.k_values.empty() ? std::int64_t{100000} : static_cast<std::int64_t>(c.k_values.front());
  const GumbelReport rep = gumbel_fluctuation_check(c.n, kn, c.replicas, run.root);
  run.results["k_n"] = kn;
  run.results["ks_distance"] = rep.ks;
  run.results["median"] = rep.median;
  run.results["iqr"] = rep.iqr;
  run.results["lattice_span"] = rep.lattice_span;
  Table table("apmatch.er.gumbel.v1", {"n", "k_n", "replicas", "ks_distance", "median", "iqr", "lattice_span"});
  table.cell(c.n).cell(kn).cell(rep.replicas).cell(rep.ks).cell(rep.median).cell(rep.iqr).cell(rep.lattice_span).end_row();
  return table.text();
}

}  // namespace

const char* to_string(ExperimentKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view text) {
  for (const auto& k : kKinds) {
    if (text == k.name) return k.kind;
  }
  if (text == "erdos_renyi") return ExperimentKind::erdos_renyi;
  return std::nullopt;
}

std::string ConfigIssue::format() const {
  std::string where = line > 0 ? "line " + std::to_string(line) : std::string("override");
  return where + ": " + field + ": " + message;
}

ConfigValidation validate_config(std::string_view text,
                                 const std::vector<std::pair<std::string, std::string>>& overrides) {
  ConfigValidation out;
  std::map<std::string, Located> seen;
  std::vector<std::string> order;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      out.errors.push_back({line_no, trim(line), "expected 'key = value'"});
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (seen.contains(key)) {
      out.errors.push_back({line_no, key, "duplicate key (first given on line " + std::to_string(seen[key].line) + ")"});
      continue;
    }
    seen[key] = {value, line_no};
    order.push_back(key);
  }
  for (const auto& [key, value] : overrides) {
    if (!seen.contains(key)) order.push_back(key);
    seen[key] = {value, 0};
  }

  out.keys = order;
  ExperimentConfig config;
  const auto& table = setters();
  std::vector<std::string> keys = order;
  std::stable_sort(keys.begin(), keys.end(), [](const std::string& a, const std::string& b) {
    return (a == "kind" ? 0 : 1) < (b == "kind" ? 0 : 1);
  });
  for (const auto& key : keys) {
    const Located& loc = seen[key];
    auto it = table.find(key);
    if (it == table.end()) {
      out.errors.push_back({loc.line, key, "unknown key"});
      continue;
    }
    try {
      it->second(config, loc.value);
    } catch (const std::exception& e) {
      out.errors.push_back({loc.line, key, e.what()});
    }
  }
  for (FieldModel* m : {&config.model_p, &config.model_q}) {
    if (m->kind == ModelKind::ising) m->sweeps = config.sweeps;
  }
  range_checks(config, seen, out);
  std::sort(out.errors.begin(), out.errors.end(),
            [](const ConfigIssue& a, const ConfigIssue& b) { return a.line < b.line; });
  if (out.errors.empty()) out.config = config;
  return out;
}

std::string canonical_text(const ExperimentConfig& c) {
  auto num = [](double v) { return format_number(v); };
  auto integer = [](std::int64_t v) { return std::to_string(v); };
  std::string s;
  auto line = [&](const char* key, const std::string& value) { s += std::string(key) + " = " + value + "\n"; };
  line("kind", to_string(c.kind));
  line("model_p", c.model_p.describe());
  line("model_q", c.model_q.describe());
  line("d", std::to_string(c.d));
  line("n", std::to_string(c.n));
  line("epsilon", num(c.epsilon));
  line("alpha", num(c.alpha));
  line("replicas", std::to_string(c.replicas));
  line("seed", std::to_string(c.seed));
  line("l_max", c.l_max < 0 ? std::string("auto") : std::to_string(c.l_max));
  line("sweeps", std::to_string(c.sweeps));
  if (!c.output.empty()) line("output", c.output);
  line("q_values", join(c.q_values, num));
  if (!c.n_values.empty()) line("n_values", join(c.n_values, integer));
  if (!c.k_values.empty()) line("k_values", join(c.k_values, num));
  line("mode", c.mode);
  line("pattern", c.pattern);
  line("task", c.task);
  line("distance", std::to_string(c.distance));
  line("epsilon0", num(c.epsilon0));
  return s;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  Run run(config);
  std::string table;
  switch (config.kind) {
    case ExperimentKind::sample: table = run_sample(run); break;
    case ExperimentKind::goodness: table = run_goodness(run); break;
    case ExperimentKind::survival: table = run_survival(run); break;
    case ExperimentKind::rd: table = run_rd(run); break;
    case ExperimentKind::renyi: table = run_renyi(run); break;
    case ExperimentKind::moments: table = run_moments(run); break;
    case ExperimentKind::erdos_renyi: table = run_erdos_renyi(run); break;
  }
  ConfigValidation v = validate_config(canonical_text(config));
  std::vector<std::string> warnings;
  for (const auto& w : v.warnings) warnings.push_back(w.field + ": " + w.message);
  run.warnings.insert(run.warnings.begin(), warnings.begin(), warnings.end());

  json summary;
  summary["schema"] = "apmatch.summary.v1";
  summary["experiment"] = to_string(config.kind);
  summary["config"] = canonical_text(config);
  summary["provenance"] = {{"version", kVersion},
                           {"generator", std::string(kGeneratorId)},
                           {"master_seed", config.seed},
                           {"replicas", config.replicas},
                           {"model_p", config.model_p.describe()},
                           {"model_q", config.model_q.describe()},
                           {"regime_epsilon0", config.epsilon0 > 0.0 ? json(config.epsilon0) : json("undeclared")}};
  summary["results"] = run.results;
  summary["checks"] = run.checks;
  summary["warnings"] = run.warnings;

  ExperimentReport report;
  report.files.push_back({"summary.json", summary.dump(2) + "\n"});
  const bool curve = config.kind == ExperimentKind::survival;
  report.files.push_back({curve ? "curve.csv" : "table.csv", table});
  for (auto& f : run.extra) report.files.push_back(std::move(f));
  report.warnings = run.warnings;
  return report;
}

std::string output_directory(const ExperimentConfig& config) {
  if (!config.output.empty()) return config.output;
  if (const char* env = std::getenv("APMATCH_OUT_DIR"); env && *env) return env;
  return "out";
}

void write_report(const ExperimentReport& report, const std::string& directory) {
  std::filesystem::create_directories(directory);
  for (const auto& f : report.files) {
    const auto path = std::filesystem::path(directory) / f.name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << f.content;
  }
}

}  // namespace apm
