#pragma once

// Experiment configuration, validation and the report-producing runner.
//
// Configurations are "key = value" lines; '#' starts a comment and list values
// are comma separated. Every key has a default, and canonical_text() writes
// all of them back in a fixed order so a config round-trips through its echo.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "apmatch/fields.hpp"

namespace apm {

enum class ExperimentKind { sample, goodness, survival, rd, renyi, moments, erdos_renyi };

const char* to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_experiment_kind(std::string_view text);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::survival;
  FieldModel model_p = FieldModel::bernoulli(0.5);
  FieldModel model_q = FieldModel::bernoulli(0.5);
  int d = 1;
  std::int64_t n = 3;
  double epsilon = 0.1;
  double alpha = 0.4;
  std::int64_t replicas = 1000;
  std::uint64_t seed = 1;
  std::int64_t l_max = -1;  // -1: chosen from the ball probability
  std::int64_t sweeps = 200;
  std::string output;       // empty: APMATCH_OUT_DIR or "./out"
  std::vector<double> q_values{1.0};
  std::vector<std::int64_t> n_values;
  std::vector<double> k_values;
  std::string mode = "auto";       // auto | exact | mc
  std::string pattern = "good";    // good | random | zeros | ones | checkerboard
  std::string task = "fit";        // erdos-renyi: identity | fit | bad-pattern | gumbel
  std::int64_t distance = 4;       // sample: largest correlation distance
  double epsilon0 = 0.0;           // declared regime constant, 0 when undeclared

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct ConfigIssue {
  int line = 0;  // 1-based line in the config text, 0 for command-line overrides
  std::string field;
  std::string message;

  [[nodiscard]] std::string format() const;
};

struct ConfigValidation {
  std::optional<ExperimentConfig> config;
  std::vector<ConfigIssue> errors;
  std::vector<ConfigIssue> warnings;
  std::vector<std::string> keys;  // keys given in the text or overrides, in order
  [[nodiscard]] bool ok() const noexcept { return errors.empty(); }
};

/// Parses and range-checks a configuration. Overrides ("key", "value") are
/// applied after the text, replacing any value given there.
ConfigValidation validate_config(std::string_view text,
                                 const std::vector<std::pair<std::string, std::string>>& overrides = {});

std::string canonical_text(const ExperimentConfig& config);

struct ReportFile {
  std::string name;
  std::string content;
};

struct ExperimentReport {
  std::vector<ReportFile> files;  // summary.json first
  std::vector<std::string> warnings;
};

/// Runs a validated configuration. The result depends only on the config.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Output directory: config.output, else $APMATCH_OUT_DIR, else "out".
std::string output_directory(const ExperimentConfig& config);

/// Writes every report file into `directory`, creating it if needed.
void write_report(const ExperimentReport& report, const std::string& directory);

}  // namespace apm
