#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "apmatch/erdosrenyi.hpp"
#include "apmatch/errors.hpp"
#include "apmatch/estimators.hpp"
#include "apmatch/experiments.hpp"
#include "apmatch/goodness.hpp"
#include "apmatch/matching.hpp"

namespace py = pybind11;

namespace {

using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

apm::Extents extents_of(const ByteArray& a) {
  if (a.ndim() < 1 || a.ndim() > apm::kMaxDim) throw apm::ArgumentError("arrays must have 1, 2 or 3 dimensions");
  apm::Extents e;
  e.dim = static_cast<int>(a.ndim());
  for (int i = 0; i < e.dim; ++i) e.side[i] = a.shape(i);
  return e;
}

apm::BitGrid grid_from(const ByteArray& a) {
  apm::BitGrid g(extents_of(a));
  const std::uint8_t* data = a.data();
  std::int64_t i = 0;
  apm::for_each_site(apm::Box{{0, 0, 0}, g.extents()}, [&](const apm::Point& x) {
    if (data[i++]) g.set(x, true);
  });
  return g;
}

ByteArray array_from(const apm::BitGrid& g) {
  const apm::Extents& e = g.extents();
  std::vector<py::ssize_t> shape(e.side.begin(), e.side.begin() + e.dim);
  ByteArray out(shape);
  std::uint8_t* data = out.mutable_data();
  std::int64_t i = 0;
  apm::for_each_site(apm::Box{{0, 0, 0}, e}, [&](const apm::Point& x) { data[i++] = g.get(x) ? 1 : 0; });
  return out;
}

apm::Pattern pattern_from(const ByteArray& a) {
  const apm::Extents e = extents_of(a);
  for (int i = 1; i < e.dim; ++i) {
    if (e.side[i] != e.side[0]) throw apm::ArgumentError("patterns must be cubic");
  }
  return apm::Pattern(apm::Cube(e.side[0] - 1, e.dim), grid_from(a));
}

apm::SeedSpec seed_of(std::uint64_t seed, std::uint64_t replica = 0) { return apm::SeedSpec{seed, replica}; }

py::dict estimate_dict(const apm::Estimate& e) {
  py::dict d;
  d["value"] = e.value;
  d["std_error"] = e.std_error;
  d["replicas"] = e.replicas;
  d["method"] = apm::to_string(e.method);
  return d;
}

}  // namespace

PYBIND11_MODULE(_apmatch, m) {
  m.doc() = "Approximate pattern matching and hitting times in binary random fields";

  py::register_exception<apm::ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<apm::DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<apm::UnsupportedModelError>(m, "UnsupportedModelError", PyExc_RuntimeError);
  py::register_exception<apm::EstimationError>(m, "EstimationError", PyExc_RuntimeError);

  py::class_<apm::FieldModel>(m, "FieldModel")
      .def_static("bernoulli", &apm::FieldModel::bernoulli, py::arg("p"))
      .def_static("ising", &apm::FieldModel::ising, py::arg("beta"), py::arg("h") = 0.0, py::arg("sweeps") = 200)
      .def_static("parse", &apm::FieldModel::parse)
      .def("describe", &apm::FieldModel::describe)
      .def("__repr__", &apm::FieldModel::describe)
      .def(py::self == py::self);

  m.def("sample_field", [](const apm::FieldModel& model, std::int64_t side, int dim, std::uint64_t seed,
                           std::uint64_t replica) {
    return array_from(apm::sample_field(model, apm::Extents::cube(dim, side), seed_of(seed, replica)).grid());
  }, py::arg("model"), py::arg("side"), py::arg("dim"), py::arg("seed"), py::arg("replica") = 0,
        "Origin-anchored sample on [0, side)^dim as a uint8 array");

  m.def("ball_threshold", [](double epsilon, std::int64_t sites) { return apm::ball_threshold_for_sites(epsilon, sites); });

  m.def("ball_probability_exact", [](const apm::FieldModel& model, const ByteArray& pattern, double epsilon) {
    return estimate_dict(apm::ball_probability_exact(model, pattern_from(pattern), apm::DistortionSpec(epsilon)));
  }, py::arg("model"), py::arg("pattern"), py::arg("epsilon"));

  m.def("ball_probability_mc", [](const apm::FieldModel& model, const ByteArray& pattern, double epsilon,
                                  std::int64_t replicas, std::uint64_t seed) {
    return estimate_dict(apm::ball_probability_mc(model, pattern_from(pattern), apm::DistortionSpec(epsilon), replicas,
                                                  seed_of(seed)));
  }, py::arg("model"), py::arg("pattern"), py::arg("epsilon"), py::arg("replicas"), py::arg("seed"));

  m.def("hitting_time", [](const ByteArray& field, const ByteArray& pattern, double epsilon, std::int64_t l_max) {
    const apm::BitGrid grid = grid_from(field);
    apm::SampleSource source(grid);
    const apm::HitResult r = apm::hitting_time(source, pattern_from(pattern), apm::DistortionSpec(epsilon), l_max);
    py::dict d;
    d["hit"] = r.hit();
    d["volume"] = r.volume;
    d["offset"] = std::vector<std::int64_t>(r.offset.begin(), r.offset.begin() + r.dim);
    return d;
  }, py::arg("field"), py::arg("pattern"), py::arg("epsilon"), py::arg("l_max"));

  m.def("mismatch_map", [](const ByteArray& field, const ByteArray& pattern) {
    const apm::MismatchMap map = apm::mismatch_map(grid_from(field), pattern_from(pattern));
    std::vector<py::ssize_t> shape(map.placements.side.begin(), map.placements.side.begin() + map.placements.dim);
    py::array_t<std::int32_t> out(shape);
    std::copy(map.counts.begin(), map.counts.end(), out.mutable_data());
    return out;
  }, py::arg("field"), py::arg("pattern"));

  m.def("is_good", [](const ByteArray& pattern, double epsilon, double alpha) {
    const apm::Pattern a = pattern_from(pattern);
    return apm::is_good(a, apm::GoodnessParams(epsilon, alpha, a.cube()));
  }, py::arg("pattern"), py::arg("epsilon"), py::arg("alpha"));

  m.def("goodness_fraction", [](const apm::FieldModel& q, std::int64_t n, int dim, double epsilon, double alpha,
                                std::int64_t replicas, std::uint64_t seed, const std::string& mode) {
    const apm::FractionMode fm = mode == "exact" ? apm::FractionMode::exact
                                 : mode == "mc"  ? apm::FractionMode::monte_carlo
                                                 : apm::FractionMode::automatic;
    return estimate_dict(apm::goodness_fraction(q, apm::GoodnessParams(epsilon, alpha, apm::Cube(n, dim)), replicas,
                                                seed_of(seed), fm));
  }, py::arg("model_q"), py::arg("n"), py::arg("dim"), py::arg("epsilon"), py::arg("alpha"),
        py::arg("replicas") = 1000, py::arg("seed") = 1, py::arg("mode") = "auto");

  m.def("binary_rate_distortion", &apm::binary_rate_distortion, py::arg("source_p"), py::arg("distortion"));
  m.def("rd_blahut_arimoto", [](double p, double epsilon, double tolerance) {
    const apm::BlahutArimotoResult r = apm::rd_blahut_arimoto(p, epsilon, tolerance);
    py::dict d;
    d["rate"] = r.rate;
    d["distortion"] = r.distortion;
    d["degenerate"] = r.degenerate;
    d["iterations"] = r.iterations;
    return d;
  }, py::arg("source_p"), py::arg("epsilon"), py::arg("tolerance") = 1e-9);

  m.def("rd_aep", [](const apm::FieldModel& p, const ByteArray& omega, double epsilon, std::int64_t replicas,
                     std::uint64_t seed) {
    return estimate_dict(apm::rd_aep(p, pattern_from(omega), apm::DistortionSpec(epsilon), replicas, seed_of(seed)));
  }, py::arg("model_p"), py::arg("omega"), py::arg("epsilon"), py::arg("replicas") = 1000, py::arg("seed") = 1);

  m.def("lambda_fit", [](const std::vector<double>& times, const std::vector<std::uint8_t>& censored,
                         double p_value, double p_se) {
    apm::Estimate p = p_se > 0.0 ? apm::Estimate::monte_carlo(p_value, p_se, 0, {}) : apm::Estimate::exact(p_value);
    return estimate_dict(apm::lambda_fit(times, censored, p).lambda);
  }, py::arg("times"), py::arg("censored"), py::arg("p_value"), py::arg("p_se") = 0.0);

  m.def("ks_exponential", [](const std::vector<double>& times, const std::vector<std::uint8_t>& censored,
                             double rescale) {
    return apm::ks_exponential(apm::survival_curve(times, censored, rescale));
  }, py::arg("times"), py::arg("censored"), py::arg("rescale") = 1.0);

  m.def("renyi_functional", [](double q, const apm::FieldModel& p, const apm::FieldModel& qm, std::int64_t n, int dim,
                               double epsilon, double alpha, const std::string& mode, std::int64_t replicas,
                               std::uint64_t seed) {
    const auto em = mode == "mc" ? apm::EnumerationMode::monte_carlo : apm::EnumerationMode::exact;
    return estimate_dict(apm::renyi_functional(q, p, qm, apm::Cube(n, dim), apm::DistortionSpec(epsilon), alpha, em,
                                               replicas, seed_of(seed)));
  }, py::arg("q"), py::arg("model_p"), py::arg("model_q"), py::arg("n"), py::arg("dim"), py::arg("epsilon"),
        py::arg("alpha"), py::arg("mode") = "exact", py::arg("replicas") = 1000, py::arg("seed") = 1);

  m.def("max_window_increment", [](const std::vector<std::int8_t>& steps, std::int64_t n) {
    return apm::max_window_increment(apm::WalkPath(steps), n);
  }, py::arg("steps"), py::arg("n"));

  m.def("walk_hitting_identity_check", [](std::int64_t n, std::int64_t k_n, double epsilon) {
    const apm::IdentityCheck c = apm::walk_hitting_identity_check(n, k_n, epsilon);
    py::dict d;
    d["length"] = c.length;
    d["lhs_count"] = c.lhs;
    d["rhs_count"] = c.rhs;
    d["lhs"] = c.lhs_probability();
    d["rhs"] = c.rhs_probability();
    d["equal"] = c.equal();
    return d;
  }, py::arg("n"), py::arg("k_n"), py::arg("epsilon"));

  m.def("validate_config", [](const std::string& text) {
    const apm::ConfigValidation v = apm::validate_config(text);
    py::dict d;
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    for (const auto& e : v.errors) errors.push_back(e.format());
    for (const auto& w : v.warnings) warnings.push_back(w.format());
    d["ok"] = v.ok();
    d["errors"] = errors;
    d["warnings"] = warnings;
    d["canonical"] = v.config ? py::object(py::str(apm::canonical_text(*v.config))) : py::object(py::none());
    return d;
  }, py::arg("text"));

  m.def("run_experiment", [](const std::string& text) {
    const apm::ConfigValidation v = apm::validate_config(text);
    if (!v.ok()) {
      std::string msg;
      for (const auto& e : v.errors) msg += e.format() + "\n";
      throw apm::ArgumentError(msg);
    }
    apm::ExperimentReport report;
    {
      py::gil_scoped_release release;
      report = apm::run_experiment(*v.config);
    }
    py::dict files;
    for (const auto& f : report.files) files[py::str(f.name)] = f.content;
    return files;
  }, py::arg("config"), "Runs an experiment and returns its report files by name");
}
