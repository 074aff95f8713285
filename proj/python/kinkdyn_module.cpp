#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kinkdyn/config.hpp"
#include "kinkdyn/errors.hpp"
#include "kinkdyn/experiments.hpp"
#include "kinkdyn/grid.hpp"
#include "kinkdyn/heteroclinic.hpp"
#include "kinkdyn/manifold.hpp"
#include "kinkdyn/noise.hpp"
#include "kinkdyn/spectral.hpp"

namespace py = pybind11;
using namespace kinkdyn;

namespace {

KinkConfig kinks(const Eigen::VectorXd& h, double eps, double kappa) {
  KinkConfig c;
  c.h = h;
  c.eps = eps;
  c.kappa = kappa;
  return c;
}

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(kinkdyn, m) {
  m.doc() = "Interface dynamics for stochastic Allen-Cahn equations";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainViolation>(m, "DomainViolation", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<FermiFailure>(m, "FermiFailure", PyExc_RuntimeError);

  m.def("chi", &chi_constant, "Energy of the heteroclinic, ∫ U'^2");
  m.def("u_het", &u_het, py::arg("x"));
  m.def("grid_nodes", [](int n) { return Grid(n).nodes(); }, py::arg("n"));
  m.def("resolving_size", [](double eps, double ppe) { return Grid::resolving(eps, ppe).size(); },
        py::arg("eps"), py::arg("points_per_eps") = 5.0);

  m.def(
      "build_profile",
      [](const Eigen::VectorXd& h, double eps, int n, double kappa) {
        return build_profile(kinks(h, eps, kappa), Grid(n)).values;
      },
      py::arg("h"), py::arg("eps"), py::arg("n"), py::arg("kappa") = 0.1);
  m.def(
      "admissible",
      [](const Eigen::VectorXd& h, double eps, double kappa) {
        return admissible(kinks(h, eps, kappa));
      },
      py::arg("h"), py::arg("eps"), py::arg("kappa") = 0.1);
  m.def(
      "gram_matrix",
      [](const Eigen::VectorXd& h, double eps, int n) {
        const Grid g(n);
        return gram_matrix(kinks(h, eps, 0.1), GridFunction(g));
      },
      py::arg("h"), py::arg("eps"), py::arg("n"));
  m.def("analytic_metric_inverse",
        [](int n, double eps) { return analytic_metric_inverse(n, eps); }, py::arg("n"),
        py::arg("eps"));
  m.def("profile_mass",
        [](const Eigen::VectorXd& h, double eps) { return profile_mass(kinks(h, eps, 0.1)); },
        py::arg("h"), py::arg("eps"));
  m.def(
      "fermi_split",
      [](const Eigen::VectorXd& u, const Eigen::VectorXd& h_init, double eps, double kappa) {
        const Grid g(static_cast<int>(u.size()));
        const FermiSplit s = fermi_split(GridFunction(g, u), kinks(h_init, eps, kappa));
        return py::make_tuple(s.h.h, s.v.values, s.iterations);
      },
      py::arg("u"), py::arg("h_init"), py::arg("eps"), py::arg("kappa") = 0.1,
      "Returns (positions, v, iterations) with v orthogonal to every tangent");

  m.def(
      "whole_line_spectrum",
      [](double a, int n, int count) {
        const WholeLineReport r = whole_line_spectrum(a, n, count);
        return py::make_tuple(r.eigenvalues, r.overlap_tangent, r.overlap_second);
      },
      py::arg("halfwidth"), py::arg("n"), py::arg("count") = 4);
  m.def(
      "ac_gap",
      [](const Eigen::VectorXd& h, double eps) {
        const KinkConfig c = kinks(h, eps, 0.1);
        const Grid g = Grid::resolving(eps);
        std::vector<GridFunction> tans;
        for (int i = 0; i < c.count(); ++i) tans.push_back(tangent(c, i, g));
        return constrained_gap(c, tans, g);
      },
      py::arg("h"), py::arg("eps"));

  m.def(
      "clopper_pearson",
      [](int k, int n, double conf) {
        const BinomialInterval ci = clopper_pearson(k, n, conf);
        return py::make_tuple(ci.lower, ci.upper);
      },
      py::arg("k"), py::arg("n"), py::arg("confidence") = 0.95);

  m.def(
      "default_config",
      [](const std::string& scenario) {
        return to_python(to_json(config_from_json({{"scenario", scenario}})));
      },
      py::arg("scenario"));
  m.def(
      "parse_config", [](const std::string& text) { return to_python(to_json(parse_config(text))); },
      py::arg("text"), "Strict parse; returns the config with defaults filled");
  m.def(
      "run_experiment",
      [](const std::string& text, const std::string& out) {
        const ExperimentConfig cfg = parse_config(text);
        ExperimentReport rep;
        {
          py::gil_scoped_release release;
          rep = run_experiment(cfg);
          if (!out.empty()) write_outputs(rep, out);
        }
        return to_python(rep.summary);
      },
      py::arg("config_json"), py::arg("out") = "",
      "Runs a scenario from JSON text and returns the summary");
}
