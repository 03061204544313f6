#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pnewton/harness.hpp"
#include "pnewton/root_finding.hpp"

namespace py = pybind11;
using namespace pnewton;

namespace {

SymMatrix sym(const Matrix& m) { return SymMatrix(m); }

PreconditionerPolicy precond_from(const std::string& name) {
  if (name == "identity") return PreconditionerPolicy::identity();
  if (name == "diag") return PreconditionerPolicy::hessian_diagonal();
  throw InvalidArgument("unknown preconditioner '" + name + "' (identity, diag)");
}

SolverConfig make_config(const std::string& method, const std::string& precond, double rho0,
                         double c, double rho_max, double step_L, int max_iters, double grad_tol) {
  SolverConfig cfg;
  cfg.method = parse_method(method);
  cfg.precond = precond_from(precond);
  cfg.schedule = {rho0, c, rho_max};
  cfg.step_L = step_L;
  cfg.max_iters = max_iters;
  cfg.grad_tol = grad_tol;
  cfg.validate();
  return cfg;
}

py::dict trace_to_dict(const IterateTrace& t) {
  const auto n = static_cast<Index>(t.records.size());
  const Index dim = t.records.empty() ? 0 : t.records.front().x.size();
  Matrix xs(n, dim);
  Vector f(n), grad(n), rho(n), step(n);
  std::vector<std::optional<double>> lyap;
  for (Index i = 0; i < n; ++i) {
    const auto& r = t.records[static_cast<std::size_t>(i)];
    xs.row(i) = r.x.transpose();
    f(i) = r.f;
    grad(i) = r.grad_norm;
    rho(i) = r.rho;
    step(i) = std::sqrt(r.step_norm_G_sq);
    lyap.push_back(r.lyapunov);
  }
  py::dict d;
  d["method"] = std::string(to_string(t.method));
  d["termination"] = std::string(to_string(t.termination));
  d["iterations"] = t.iterations();
  d["f_star"] = t.f_star;
  d["x"] = xs;
  d["f"] = f;
  d["grad_norm"] = grad;
  d["rho"] = rho;
  d["step_norm_G"] = step;
  d["lyapunov"] = lyap;
  return d;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict report_to_dict(const ContractionReport& r) { return json_to_py(to_json(r, "")); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Penalty and augmented Newton solvers (C++ core)";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  py::class_<GlmProblem>(m, "GlmProblem")
      .def(py::init([](const Matrix& a, const std::string& link, double alpha,
                       std::optional<Vector> labels) {
             return glm_build(a, parse_link(link), alpha, labels);
           }),
           py::arg("a"), py::arg("link") = "logistic", py::arg("alpha") = 0.1,
           py::arg("labels") = py::none(),
           "GLM with data matrix `a` (n features x m samples).")
      .def_property_readonly("dimension", &GlmProblem::dimension)
      .def_property_readonly("samples", &GlmProblem::samples)
      .def_property_readonly("alpha", &GlmProblem::alpha)
      .def_property_readonly("link", [](const GlmProblem& p) { return std::string(to_string(p.link())); })
      .def("value", &GlmProblem::value, py::arg("x"))
      .def("gradient", &GlmProblem::gradient, py::arg("x"))
      .def("hessian", [](const GlmProblem& p, const Vector& x) { return p.hessian(x).matrix(); },
           py::arg("x"))
      .def("constants", [](const GlmProblem& p) {
        const auto c = glm_constants(p);
        py::dict d;
        d["L"] = c.L;
        d["mu"] = c.mu;
        d["u"] = c.u;
        d["ell"] = c.ell;
        d["sigma_max_sq"] = c.sigma_max_sq;
        return d;
      });

  m.def("load_dataset",
        [](const std::string& path, const std::string& format) {
          Dataset d = load_dataset(path, parse_format(format));
          return py::make_tuple(d.a, d.labels);
        },
        py::arg("path"), py::arg("format") = "csv",
        "Returns (A, labels) with samples as columns of A.");

  m.def("solve",
        [](const GlmProblem& p, const Vector& x0, const std::string& method,
           const std::string& precond, double rho0, double c, double rho_max,
           std::optional<double> step_L, int max_iters, double grad_tol,
           std::optional<double> f_star) {
          const double L = step_L.value_or(glm_constants(p).L);
          const auto cfg = make_config(method, precond, rho0, c, rho_max, L, max_iters, grad_tol);
          IterateTrace t;
          {
            py::gil_scoped_release release;
            t = solve(p, x0, cfg, f_star);
          }
          return trace_to_dict(t);
        },
        py::arg("problem"), py::arg("x0"), py::arg("method") = "pnm",
        py::arg("precond") = "identity", py::arg("rho0") = 1.0, py::arg("c") = 2.0,
        py::arg("rho_max") = 1e12, py::arg("step_L") = py::none(), py::arg("max_iters") = 500,
        py::arg("grad_tol") = 1e-8, py::arg("f_star") = py::none());

  m.def("optimum",
        [](const GlmProblem& p, std::optional<Vector> x0) {
          const auto est = optimum_oracle(p, x0.value_or(Vector::Zero(p.dimension())));
          return py::make_tuple(est.x, est.f, est.grad_norm);
        },
        py::arg("problem"), py::arg("x0") = py::none(),
        "Reference minimizer (x, f, grad_norm) from damped Newton.");

  m.def("newton_step",
        [](const GlmProblem& p, const Vector& x, double L) { return newton_step(p, x, L); },
        py::arg("problem"), py::arg("x"), py::arg("step_L") = 1.0);
  m.def("pnm_step",
        [](const GlmProblem& p, const Vector& x, double rho, const Matrix& g, double L) {
          return pnm_step(p, x, rho, sym(g), L);
        },
        py::arg("problem"), py::arg("x"), py::arg("rho"), py::arg("G"), py::arg("step_L") = 1.0);
  m.def("anm_step",
        [](const GlmProblem& p, const Vector& x, const Vector& x_prev, double rho, const Matrix& g,
           double L) { return anm_step_momentum(p, x, x_prev, rho, sym(g), L); },
        py::arg("problem"), py::arg("x"), py::arg("x_prev"), py::arg("rho"), py::arg("G"),
        py::arg("step_L") = 1.0);

  m.def("compute_K",
        [](const Matrix& h, const Matrix& g, double rho) { return compute_K(sym(h), sym(g), rho).matrix(); },
        py::arg("H"), py::arg("G"), py::arg("rho"));
  m.def("compute_Lmat",
        [](const Matrix& h, const Matrix& g, double rho) {
          return compute_Lmat(sym(h), sym(g), rho).matrix();
        },
        py::arg("H"), py::arg("G"), py::arg("rho"));
  m.def("compute_xi",
        [](const Matrix& h, const Matrix& g, double rho) { return compute_xi(sym(h), sym(g), rho); },
        py::arg("H"), py::arg("G"), py::arg("rho"));
  m.def("compute_beta",
        [](const Matrix& h, const Matrix& g, double rho) { return compute_beta(sym(h), sym(g), rho); },
        py::arg("H"), py::arg("G"), py::arg("rho"));
  m.def("verify_inverse_identities",
        [](const Matrix& h, const Matrix& g, double rho, double tol) {
          const auto r = verify_inverse_identities(sym(h), sym(g), rho, tol);
          py::dict d;
          d["ok"] = r.ok;
          d["residual_hk"] = r.residual_hk;
          d["residual_gkg"] = r.residual_gkg;
          return d;
        },
        py::arg("H"), py::arg("G"), py::arg("rho"), py::arg("tol") = 1e-8);

  m.def("certify",
        [](const GlmProblem& p, const Vector& x0, const std::string& method,
           const std::string& precond, double rho, int max_iters) {
          const auto consts = glm_constants(p);
          const auto cfg = make_config(method, precond, rho, 1.0, rho, consts.L, max_iters, 1e-8);
          const double f_star = optimum_oracle(p, Vector::Zero(p.dimension())).f;
          const IterateTrace t = solve(p, x0, cfg, f_star);
          const auto report = cfg.method == Method::anm
                                  ? certify_anm_lyapunov(t, p, cfg.precond, consts.mu, consts.L)
                                  : certify_pnm_contraction(t, p, cfg.precond, consts.mu, consts.L);
          return report_to_dict(report);
        },
        py::arg("problem"), py::arg("x0"), py::arg("method") = "pnm",
        py::arg("precond") = "identity", py::arg("rho") = 1.0, py::arg("max_iters") = 500,
        "Fixed-penalty run followed by its per-iteration rate certificate.");

  m.def("root_penalty_newton", &root_penalty_newton, py::arg("f"), py::arg("fprime"),
        py::arg("x0"), py::arg("rho"), py::arg("tol") = 1e-10, py::arg("max_iters") = 100);
  m.def("root_augmented_newton", &root_augmented_newton, py::arg("f"), py::arg("fprime"),
        py::arg("x0"), py::arg("x1"), py::arg("rho"), py::arg("tol") = 1e-10,
        py::arg("max_iters") = 100);
  py::class_<RootResult>(m, "RootResult")
      .def_readonly("root", &RootResult::root)
      .def_readonly("iterations", &RootResult::iterations)
      .def_readonly("trace", &RootResult::trace);

  m.def("run_experiment",
        [](const py::object& spec, const std::string& base_dir) {
          const auto parsed = parse_experiment_spec(py_to_json(spec), base_dir);
          nlohmann::json summary;
          {
            py::gil_scoped_release release;
            summary = run_experiment(parsed);
          }
          return json_to_py(summary);
        },
        py::arg("spec"), py::arg("base_dir") = "",
        "Runs an experiment described by a dict and returns the summary dict.");

}
