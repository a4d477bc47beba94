#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "apmatch/errors.hpp"
#include "apmatch/experiments.hpp"

namespace {

constexpr int kExitInvalidConfig = 2;
constexpr int kExitRefused = 3;

struct Invocation {
  std::string config_path;
  std::vector<std::string> sets;
  std::string output;
};

bool read_file(const std::string& path, std::string& text) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream buf;
  buf << in.rdbuf();
  text = buf.str();
  return true;
}

apm::ConfigValidation load(const Invocation& inv, const std::string& kind) {
  std::string text;
  if (!inv.config_path.empty() && !read_file(inv.config_path, text)) {
    apm::ConfigValidation v;
    v.errors.push_back({0, "config", "cannot read " + inv.config_path});
    return v;
  }
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& s : inv.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      apm::ConfigValidation v;
      v.errors.push_back({0, s, "--set expects key=value"});
      return v;
    }
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (!inv.output.empty()) overrides.emplace_back("output", inv.output);
  apm::ConfigValidation v = apm::validate_config(text, overrides);
  if (kind.empty()) return v;
  if (std::find(v.keys.begin(), v.keys.end(), "kind") == v.keys.end()) {
    overrides.emplace_back("kind", kind);
    return apm::validate_config(text, overrides);
  }
  if (v.config && apm::to_string(v.config->kind) != kind) {
    v.errors.push_back({0, "kind", "config declares '" + std::string(apm::to_string(v.config->kind)) +
                                       "' but the subcommand is '" + kind + "'"});
    v.config.reset();
  }
  return v;
}

int report_issues(const apm::ConfigValidation& v) {
  for (const auto& w : v.warnings) std::cerr << "warning: " << w.format() << "\n";
  for (const auto& e : v.errors) std::cerr << "error: " << e.format() << "\n";
  return v.ok() ? 0 : kExitInvalidConfig;
}

int run(const Invocation& inv, const std::string& kind) {
  const apm::ConfigValidation v = load(inv, kind);
  if (int rc = report_issues(v); rc != 0) return rc;
  try {
    const apm::ExperimentReport report = apm::run_experiment(*v.config);
    const std::string dir = apm::output_directory(*v.config);
    apm::write_report(report, dir);
    for (const auto& f : report.files) std::cout << dir << "/" << f.name << "\n";
  } catch (const apm::UnsupportedModelError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return kExitRefused;
  } catch (const apm::EstimationError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return kExitRefused;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRefused;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "apmatch: approximate pattern matching in random fields.\n"
      "Configs are 'key = value' lines; see `apmatch validate --help` for the keys.\n"
      "Outputs go to the config's `output`, else $APMATCH_OUT_DIR, else ./out.\n"
      "Worker threads: $APMATCH_THREADS (results do not depend on it)."};
  app.require_subcommand(1);

  Invocation inv;
  const std::vector<std::pair<std::string, std::string>> kinds = {
      {"sample", "Draw one field sample and its pair-correlation profile"},
      {"goodness", "Fraction of (epsilon,alpha)-good patterns"},
      {"survival", "Rescaled hitting-time survival curve, Lambda fit and KS distance"},
      {"rd", "Rate-distortion estimate from the ball probability"},
      {"renyi", "Renyi functional of the ball probabilities"},
      {"moments", "Moment ratio of waiting times against ball probabilities"},
      {"erdos-renyi", "Walk identity, k_n fit, bad-pattern and Gumbel checks (task key)"},
  };
  std::string chosen;
  for (const auto& [name, help] : kinds) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", inv.config_path, "Configuration file");
    sub->add_option("-s,--set", inv.sets, "Override a config field, key=value (repeatable)");
    sub->add_option("-o,--output", inv.output, "Output directory");
    sub->callback([&chosen, n = name] { chosen = n; });
  }
  CLI::App* validate = app.add_subcommand(
      "validate",
      "Check a configuration and echo it in canonical form.\n"
      "Keys: kind model_p model_q d n epsilon alpha replicas seed l_max sweeps output\n"
      "      q_values n_values k_values mode pattern task distance epsilon0");
  validate->add_option("config", inv.config_path, "Configuration file")->required();
  validate->add_option("-s,--set", inv.sets, "Override a config field, key=value (repeatable)");

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) {
    const apm::ConfigValidation v = load(inv, "");
    if (int rc = report_issues(v); rc != 0) return rc;
    std::cout << apm::canonical_text(*v.config);
    return 0;
  }
  return run(inv, chosen);
}
