#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <json.hpp>

#include "apmatch/experiments.hpp"

using namespace apm;
using json = nlohmann::json;

namespace {

ExperimentConfig must_parse(const std::string& text) {
  const ConfigValidation v = validate_config(text);
  REQUIRE(v.ok());
  return *v.config;
}

const ReportFile& file_named(const ExperimentReport& r, const std::string& name) {
  for (const auto& f : r.files) {
    if (f.name == name) return f;
  }
  FAIL("missing report file " << name);
  return r.files.front();
}

bool has_issue(const std::vector<ConfigIssue>& issues, int line, const std::string& field) {
  for (const auto& i : issues) {
    if (i.line == line && i.field == field) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("validation names the offending line and field") {
    const ConfigValidation v = validate_config("kind = rd\n# comment\nepsilon = 1.5\nalpha = 0.3\n");
    CHECK_FALSE(v.ok());
    CHECK(has_issue(v.errors, 3, "epsilon"));
    CHECK(v.errors.front().format() == "line 3: epsilon: must lie in [0,1]");

    const ConfigValidation unknown = validate_config("kind = rd\ncolour = blue\n");
    CHECK(has_issue(unknown.errors, 2, "colour"));
    const ConfigValidation dup = validate_config("n = 3\nn = 4\n");
    CHECK(has_issue(dup.errors, 2, "n"));
    const ConfigValidation no_eq = validate_config("kind rd\n");
    CHECK_FALSE(no_eq.ok());
    const ConfigValidation bad_number = validate_config("replicas = many\n");
    CHECK(has_issue(bad_number.errors, 1, "replicas"));
    const ConfigValidation over = validate_config("kind = rd\n", {{"epsilon", "2"}});
    CHECK(has_issue(over.errors, 0, "epsilon"));
    CHECK(over.errors.front().format().rfind("override: ", 0) == 0);

    CHECK(has_issue(validate_config("kind = moments\nreplicas = 50\n").errors, 2, "replicas"));
    CHECK(has_issue(validate_config("kind = erdos-renyi\nd = 2\nk_values = 10\n").errors, 2, "d"));
    CHECK(has_issue(validate_config("kind = survival\nn = 5\nl_max = 3\n").errors, 3, "l_max"));
  }

  TEST_CASE("models outside the allowlist warn") {
    const ConfigValidation v = validate_config("kind = sample\nd = 2\nmodel_p = ising(beta=0.6,h=0)\n");
    CHECK(v.ok());
    REQUIRE(v.warnings.size() == 1);
    CHECK(v.warnings[0].line == 3);
    CHECK(v.warnings[0].message.find("allowlist") != std::string::npos);
    CHECK(validate_config("kind = sample\nd = 2\nmodel_p = ising(beta=0.3,h=0)\n").warnings.empty());
  }

  TEST_CASE("sweeps reach the Ising models") {
    const ExperimentConfig c = must_parse("model_p = ising(beta=0.2,h=0)\nsweeps = 17\n");
    CHECK(c.model_p.sweeps == 17);
  }

  TEST_CASE("canonical text round trips") {
    const ExperimentConfig c = must_parse(
        "kind = renyi\nmodel_p = bernoulli(p=0.3)\nmodel_q = ising(beta=0.25,h=0.1,sweeps=40)\nd = 2\n"
        "n_values = 2, 3\nq_values = -0.5, 1, 2\nepsilon = 0.05\nalpha = 0.45\nseed = 99\nl_max = 77\n");
    const std::string text = canonical_text(c);
    const ExperimentConfig back = must_parse(text);
    CHECK(back == c);
    CHECK(canonical_text(back) == text);
    CHECK(text.rfind("kind = renyi\n", 0) == 0);
  }

  TEST_CASE("rd report on nine sites") {
    const ExperimentReport r = run_experiment(must_parse("kind = rd\nn = 8\nepsilon = 0.2\npattern = random\n"));
    REQUIRE_FALSE(r.files.empty());
    CHECK(r.files.front().name == "summary.json");
    const json s = json::parse(r.files.front().content);
    CHECK(s["schema"] == "apmatch.summary.v1");
    CHECK(s["results"]["method"] == "exact");
    CHECK(s["results"]["value"].get<double>() == doctest::Approx(std::log(512.0 / 10.0) / 9.0).epsilon(1e-12));
    CHECK(s["checks"]["blahut_arimoto_matches_closed_form"] == true);
    CHECK(file_named(r, "table.csv").content.rfind("#schema=apmatch.rd.table.v1\n", 0) == 0);
  }

  TEST_CASE("goodness report") {
    const ExperimentReport vac = run_experiment(must_parse("kind = goodness\nn = 1\nd = 2\nepsilon = 0.1\n"));
    bool warned = false;
    for (const auto& w : vac.warnings) warned = warned || w.find("vacuous") != std::string::npos;
    CHECK(warned);

    const ExperimentReport r =
        run_experiment(must_parse("kind = goodness\nn = 3\nepsilon = 0\nalpha = 0.5\npattern = checkerboard\n"));
    const json s = json::parse(r.files.front().content);
    CHECK(s["results"]["fractions"][0]["fraction"]["value"].get<double>() == doctest::Approx(14.0 / 16.0));
    const std::string& profile = file_named(r, "profile.csv").content;
    CHECK(profile == "#schema=apmatch.goodness.profile.v1\nx0,disagreement,overlap,limit,pass\n"
                     "-1,3,3,0,pass\n1,3,3,0,pass\n");
  }

  TEST_CASE("erdos-renyi identity report") {
    const ExperimentReport r =
        run_experiment(must_parse("kind = erdos-renyi\ntask = identity\nn_values = 1, 2, 3\nk_values = 0, 2, 5\nepsilon = 0.1\n"));
    const json s = json::parse(r.files.front().content);
    CHECK(s["checks"]["identity_exact"] == true);
  }

  TEST_CASE("reruns are byte identical and independent of the thread count") {
    const std::vector<std::string> configs{
        "kind = survival\nd = 1\nn = 6\nepsilon = 0.15\nreplicas = 300\nseed = 4\n",
        "kind = sample\nmodel_p = ising(beta=0.3,h=0,sweeps=20)\nd = 2\nn = 15\ndistance = 3\nreplicas = 4\n",
        "kind = goodness\nd = 2\nn_values = 2, 4\nepsilon = 0.05\nmode = mc\nreplicas = 500\npattern = random\n",
        "kind = moments\nd = 1\nn = 3\nepsilon = 0\nalpha = 0.5\nq_values = -0.5, 1\nreplicas = 200\n",
        "kind = renyi\nd = 1\nn = 5\nepsilon = 0.1\nq_values = 1, 2\nmode = mc\nreplicas = 300\n",
        "kind = erdos-renyi\ntask = bad-pattern\nn = 8\nepsilon = 0.1\nreplicas = 500\n",
    };
    for (const auto& text : configs) {
      const ExperimentConfig c = must_parse(text);
      setenv("APMATCH_THREADS", "1", 1);
      const ExperimentReport a = run_experiment(c);
      setenv("APMATCH_THREADS", "3", 1);
      const ExperimentReport b = run_experiment(c);
      unsetenv("APMATCH_THREADS");
      REQUIRE(a.files.size() == b.files.size());
      for (std::size_t i = 0; i < a.files.size(); ++i) {
        CHECK(a.files[i].name == b.files[i].name);
        CHECK(a.files[i].content == b.files[i].content);
      }
    }
  }

  TEST_CASE("runner refuses impossible requests") {
    CHECK_THROWS(run_experiment(must_parse("kind = survival\nd = 1\nn = 399\nepsilon = 0.2\nalpha = 0.4\n")));
  }
}
