#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "pnewton/harness.hpp"
#include "pnewton/root_finding.hpp"

namespace pnewton {

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSolver = 1;
constexpr int kExitUsage = 2;

struct SolveOptions {
  std::string method = "pnm";
  std::string precond = "identity";
  double rho0 = 1.0;
  double c = 2.0;
  double rho_max = 1e12;
  std::optional<double> step_L;
  double tol = 1e-8;
  int max_iters = 500;
  std::string dataset;
  std::string format = "csv";
  std::optional<std::string> link;
  double alpha = 0.1;
  std::uint64_t seed = 0;
  std::string init = "random";
  std::string out;
  std::optional<double> fstar;
  bool diagnostics = false;
  bool timing = false;
};

struct RunOptions {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool diagnostics = false;
  bool timing = false;
};

struct CertifyOptions {
  std::string summary;
  std::string solver;
  std::string dataset;
  std::string out;
};

struct RootOptions {
  std::string poly;
  double rho = 1.0;
  double x0 = 0.0;
  std::optional<double> x1;
  double tol = 1e-10;
  int max_iters = 100;
  std::string variant = "both";
};

void print_solver_line(std::ostream& out, const json& s) {
  out << s.at("name").get<std::string>() << ": ";
  if (s.at("status") != "ok") {
    out << "FAILED (" << s.at("error").get<std::string>() << ")\n";
    return;
  }
  out << s.at("termination").get<std::string>() << " after " << s.at("iterations").get<int>()
      << " iterations, f = " << format_double(s.at("final_f").get<double>())
      << ", gap = " << format_double(s.at("final_gap").get<double>())
      << ", |grad| = " << format_double(s.at("final_grad_norm").get<double>());
  if (const auto& cert = s.at("certification"); !cert.is_null()) {
    out << ", certified = " << (cert.at("certified").get<bool>() ? "yes" : "no")
        << " (vacuous steps: " << cert.at("vacuous_count").get<int>() << ")";
  }
  out << '\n';
}

int report_experiment(std::ostream& out, const json& summary) {
  const auto& p = summary.at("problem");
  out << "problem: n = " << p.at("n").get<long>() << ", m = " << p.at("m").get<long>()
      << ", link = " << p.at("link").get<std::string>()
      << ", L = " << format_double(p.at("L").get<double>())
      << ", mu = " << format_double(p.at("mu").get<double>()) << '\n';
  if (const auto& fs = summary.at("fstar"); !fs.is_null()) {
    out << "f* = " << format_double(fs.at("value").get<double>()) << " ("
        << fs.at("policy").get<std::string>() << ")\n";
  }
  int code = kExitOk;
  for (const auto& s : summary.at("solvers")) {
    print_solver_line(out, s);
    if (s.at("status") != "ok") code = kExitSolver;
  }
  return code;
}

int do_run(const RunOptions& o, std::ostream& out) {
  ExperimentSpec spec = load_experiment_spec(o.spec);
  if (!o.out.empty()) spec.out = o.out;
  if (o.seed) spec.seed = *o.seed;
  spec.diagnostics = spec.diagnostics || o.diagnostics;
  spec.timing = spec.timing || o.timing;
  return report_experiment(out, run_experiment(spec));
}

int do_solve(const SolveOptions& o, std::ostream& out) {
  ExperimentSpec spec;
  if (o.dataset.empty()) {
    spec.dataset.builtin = "quadratic";
  } else {
    spec.dataset.path = o.dataset;
    spec.dataset.format = parse_format(o.format);
  }
  spec.link = parse_link(o.link.value_or(o.dataset.empty() ? "squared" : "logistic"));
  spec.alpha = o.alpha;
  spec.seed = o.seed;
  spec.init = o.init;
  spec.out = o.out;
  spec.diagnostics = o.diagnostics;
  spec.timing = o.timing;
  if (o.fstar) spec.fstar = {FStarPolicy::Kind::provided, *o.fstar};

  json entry = {{"name", o.method},      {"method", o.method}, {"precond", o.precond},
                {"rho0", o.rho0},        {"c", o.c},           {"rho_max", o.rho_max},
                {"max_iters", o.max_iters}, {"grad_tol", o.tol}};
  if (o.step_L) entry["step_L"] = *o.step_L;
  spec.solvers.push_back(solver_spec_from_json(entry));
  return report_experiment(out, run_experiment(spec));
}

int do_certify(const CertifyOptions& o, std::ostream& out) {
  std::optional<std::filesystem::path> dataset;
  if (!o.dataset.empty()) dataset = o.dataset;
  const json cert = recertify(o.summary, o.solver, dataset);
  const std::string text = cert.dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
  } else {
    std::ofstream f(o.out, std::ios::binary);
    f << text;
    if (!f) throw ParseError("cannot write '" + o.out + "'", 0);
    out << "certified = " << (cert.at("certified").get<bool>() ? "yes" : "no") << '\n';
  }
  return kExitOk;
}

void print_root(std::ostream& out, const char* label, const RootResult& r, const Polynomial& p) {
  out << label << ": root = " << std::fixed << std::setprecision(10) << r.root
      << std::defaultfloat << std::setprecision(6) << ", |f(root)| = " << std::abs(p(r.root))
      << ", iterations = " << r.iterations << '\n';
  out << "  trace:";
  for (double x : r.trace) out << ' ' << format_double(x);
  out << '\n';
}

int do_root(const RootOptions& o, std::ostream& out) {
  const Polynomial p = Polynomial::parse(o.poly);
  const Polynomial dp = p.derivative();
  const ScalarFn f = [&p](double x) { return p(x); };
  const ScalarFn fp = [&dp](double x) { return dp(x); };
  if (o.variant == "penalty" || o.variant == "both") {
    print_root(out, "penalty", root_penalty_newton(f, fp, o.x0, o.rho, o.tol, o.max_iters), p);
  }
  if (o.variant == "augmented" || o.variant == "both") {
    print_root(out, "augmented",
               root_augmented_newton(f, fp, o.x0, o.x1.value_or(o.x0), o.rho, o.tol, o.max_iters),
               p);
  }
  return kExitOk;
}

bool is_usage_error(const Error& e) {
  return dynamic_cast<const InvalidArgument*>(&e) != nullptr;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Penalty and augmented Newton solvers for regularized GLMs", "pnewton"};
  app.require_subcommand(1);

  const std::vector<std::string> methods = {"newton", "damped_newton", "pnm", "anm"};
  const std::vector<std::string> preconds = {"identity", "diag"};
  const std::vector<std::string> links = {"logistic", "squared"};
  const std::vector<std::string> formats = {"csv", "libsvm"};

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run every solver of an experiment spec (JSON)");
  run_cmd->add_option("spec", run.spec, "Experiment spec file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "Output directory (overrides the spec)");
  run_cmd->add_option("--seed", run.seed, "Seed for the initial point (overrides the spec)");
  run_cmd->add_flag("--diagnostics", run.diagnostics, "Write rate certificates");
  run_cmd->add_flag("--timing", run.timing, "Record wall-clock time per iterate");

  SolveOptions solve_opt;
  auto* solve_cmd = app.add_subcommand("solve", "Run one solver on one problem");
  solve_cmd->add_option("--method", solve_opt.method, "Solver")
      ->check(CLI::IsMember(methods))->capture_default_str();
  solve_cmd->add_option("--precond", solve_opt.precond, "Penalty weighting G")
      ->check(CLI::IsMember(preconds))->capture_default_str();
  solve_cmd->add_option("--rho0", solve_opt.rho0, "Initial penalty")->capture_default_str();
  solve_cmd->add_option("--c", solve_opt.c, "Penalty growth factor")->capture_default_str();
  solve_cmd->add_option("--rho-max", solve_opt.rho_max, "Penalty cap")->capture_default_str();
  solve_cmd->add_option("--step-L", solve_opt.step_L, "Step scaling (default: relative L)");
  solve_cmd->add_option("--tol", solve_opt.tol, "Gradient norm tolerance")->capture_default_str();
  solve_cmd->add_option("--max-iters", solve_opt.max_iters, "Iteration budget")
      ->capture_default_str();
  solve_cmd->add_option("--dataset", solve_opt.dataset, "Dataset file (default: builtin quadratic)");
  solve_cmd->add_option("--format", solve_opt.format, "Dataset format")
      ->check(CLI::IsMember(formats))->capture_default_str();
  solve_cmd->add_option("--link", solve_opt.link, "GLM link")->check(CLI::IsMember(links));
  solve_cmd->add_option("--alpha", solve_opt.alpha, "L2 regularization")->capture_default_str();
  solve_cmd->add_option("--seed", solve_opt.seed, "Seed for the initial point")
      ->capture_default_str();
  solve_cmd->add_option("--init", solve_opt.init, "Initial point")
      ->check(CLI::IsMember({"random", "zeros"}))->capture_default_str();
  solve_cmd->add_option("--fstar", solve_opt.fstar, "Known optimal value (default: oracle)");
  solve_cmd->add_option("--out", solve_opt.out, "Output directory");
  solve_cmd->add_flag("--diagnostics", solve_opt.diagnostics, "Write rate certificates");
  solve_cmd->add_flag("--timing", solve_opt.timing, "Record wall-clock time per iterate");

  CertifyOptions cert;
  auto* cert_cmd = app.add_subcommand("certify", "Recompute a rate certificate from run output");
  cert_cmd->add_option("--summary", cert.summary, "summary.json of the run")->required();
  cert_cmd->add_option("--solver", cert.solver, "Solver name")->required();
  cert_cmd->add_option("--dataset", cert.dataset, "Dataset file (default: the recorded path)");
  cert_cmd->add_option("--out", cert.out, "Write the certificate here instead of stdout");

  RootOptions root;
  auto* root_cmd = app.add_subcommand("demo-root", "Scalar root finding on a polynomial");
  root_cmd->add_option("--poly", root.poly, "Polynomial in x, e.g. \"x^2-2\"")->required();
  root_cmd->add_option("--rho", root.rho, "Penalty")->capture_default_str();
  root_cmd->add_option("--x0", root.x0, "Starting point")->required();
  root_cmd->add_option("--x1", root.x1, "Second starting point (augmented variant)");
  root_cmd->add_option("--tol", root.tol, "Residual tolerance")->capture_default_str();
  root_cmd->add_option("--max-iters", root.max_iters, "Iteration budget")->capture_default_str();
  root_cmd->add_option("--variant", root.variant, "Which update to run")
      ->check(CLI::IsMember({"penalty", "augmented", "both"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) return do_run(run, out);
    if (*solve_cmd) return do_solve(solve_opt, out);
    if (*cert_cmd) return do_certify(cert, out);
    return do_root(root, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_usage_error(e) ? kExitUsage : kExitSolver;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitSolver;
  }
}

}  // namespace pnewton
