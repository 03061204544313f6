#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pnewton/harness.hpp"

namespace pnewton {

using nlohmann::json;

namespace {

bool valid_solver_name(const std::string& name) {
  if (name.empty() || name.front() == '.') return false;
  return std::all_of(name.begin(), name.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
  });
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("field '") + key + "': " + e.what());
  }
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw InvalidArgument("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

PreconditionerPolicy parse_precond(std::string_view name) {
  if (name == "identity") return PreconditionerPolicy::identity();
  if (name == "diag") return PreconditionerPolicy::hessian_diagonal();
  throw InvalidArgument("unknown preconditioner '" + std::string(name) + "' (identity, diag)");
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PN_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) cap = static_cast<std::size_t>(v);
  }
  return std::min(cap, jobs);
}

std::optional<int> iterations_to_tol(const IterateTrace& trace, double tol) {
  const int first = trace.method == Method::anm ? 1 : 0;
  for (const auto& r : trace.records) {
    if (r.k >= first && r.grad_norm <= tol) return r.k - first;
  }
  return std::nullopt;
}

json number_or_null(std::optional<double> v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw ParseError("cannot write '" + path.string() + "'", 0);
}

struct SolverOutcome {
  json entry;
  bool ok = false;
};

}  // namespace

void ExperimentSpec::validate() const {
  if (solvers.empty()) throw InvalidArgument("experiment needs at least one solver");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be positive");
  if (dataset.builtin.empty() && dataset.path.empty()) {
    throw InvalidArgument("experiment needs a dataset path or a builtin problem");
  }
  if (!dataset.builtin.empty() && dataset.builtin != "quadratic") {
    throw InvalidArgument("unknown builtin problem '" + dataset.builtin + "'");
  }
  if (init != "random" && init != "zeros") {
    throw InvalidArgument("init must be 'random' or 'zeros'");
  }
  if (fstar.kind == FStarPolicy::Kind::provided && !std::isfinite(fstar.value)) {
    throw InvalidArgument("provided f* must be finite");
  }
  std::vector<std::string> names;
  for (const auto& s : solvers) {
    if (!valid_solver_name(s.name)) {
      throw InvalidArgument("solver name '" + s.name + "' must match [A-Za-z0-9_.-]+");
    }
    if (std::find(names.begin(), names.end(), s.name) != names.end()) {
      throw InvalidArgument("duplicate solver name '" + s.name + "'");
    }
    names.push_back(s.name);
    s.config.validate();
  }
}

json to_json(const SolverSpec& spec) {
  const auto& c = spec.config;
  json j = {
      {"name", spec.name},
      {"method", std::string(to_string(c.method))},
      {"precond", std::string(to_string(c.precond.kind()))},
      {"rho0", c.schedule.rho0},
      {"c", c.schedule.c},
      {"rho_max", c.schedule.rho_max},
      {"max_iters", c.max_iters},
      {"grad_tol", c.grad_tol},
      {"armijo_alpha", c.backtracking.alpha},
      {"armijo_beta", c.backtracking.beta},
  };
  j["step_L"] = spec.step_L_given ? json(c.step_L) : json(nullptr);
  return j;
}

SolverSpec solver_spec_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("solver entry must be an object");
  reject_unknown_keys(j,
                      {"name", "method", "precond", "rho0", "c", "rho_max", "max_iters",
                       "grad_tol", "step_L", "armijo_alpha", "armijo_beta"},
                      "solver entry");
  SolverSpec s;
  const std::string method = get_or<std::string>(j, "method", "");
  if (method.empty()) throw InvalidArgument("solver entry needs a 'method'");
  s.config.method = parse_method(method);
  s.name = get_or<std::string>(j, "name", method);
  s.config.precond = parse_precond(get_or<std::string>(j, "precond", "identity"));
  s.config.schedule.rho0 = get_or(j, "rho0", s.config.schedule.rho0);
  s.config.schedule.c = get_or(j, "c", s.config.schedule.c);
  s.config.schedule.rho_max = get_or(j, "rho_max", s.config.schedule.rho_max);
  s.config.max_iters = get_or(j, "max_iters", s.config.max_iters);
  s.config.grad_tol = get_or(j, "grad_tol", s.config.grad_tol);
  s.config.backtracking.alpha = get_or(j, "armijo_alpha", s.config.backtracking.alpha);
  s.config.backtracking.beta = get_or(j, "armijo_beta", s.config.backtracking.beta);
  if (const auto it = j.find("step_L"); it != j.end() && !it->is_null()) {
    s.config.step_L = get_or(j, "step_L", 1.0);
    s.step_L_given = true;
  }
  return s;
}

ExperimentSpec parse_experiment_spec(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw InvalidArgument("experiment spec must be a JSON object");
  reject_unknown_keys(j,
                      {"dataset", "link", "alpha", "solvers", "seed", "init", "out",
                       "diagnostics", "timing", "fstar"},
                      "experiment spec");
  ExperimentSpec spec;

  const auto ds = j.find("dataset");
  if (ds == j.end() || !ds->is_object()) throw InvalidArgument("experiment needs a 'dataset' object");
  reject_unknown_keys(*ds, {"builtin", "path", "format"}, "dataset");
  spec.dataset.builtin = get_or<std::string>(*ds, "builtin", "");
  if (const std::string p = get_or<std::string>(*ds, "path", ""); !p.empty()) {
    const std::filesystem::path path(p);
    spec.dataset.path = path.is_absolute() ? path : base_dir / path;
  }
  spec.dataset.format = parse_format(get_or<std::string>(*ds, "format", "csv"));

  const std::string default_link = spec.dataset.builtin == "quadratic" ? "squared" : "logistic";
  spec.link = parse_link(get_or<std::string>(j, "link", default_link));
  spec.alpha = get_or(j, "alpha", spec.alpha);
  spec.seed = get_or<std::uint64_t>(j, "seed", 0);
  spec.init = get_or<std::string>(j, "init", spec.init);
  if (const std::string out = get_or<std::string>(j, "out", ""); !out.empty()) {
    const std::filesystem::path path(out);
    spec.out = path.is_absolute() ? path : base_dir / path;
  }
  spec.diagnostics = get_or(j, "diagnostics", false);
  spec.timing = get_or(j, "timing", false);

  if (const auto fs = j.find("fstar"); fs != j.end() && !fs->is_null()) {
    if (fs->is_string() && fs->get<std::string>() == "oracle") {
      spec.fstar.kind = FStarPolicy::Kind::oracle;
    } else if (fs->is_object() && fs->contains("provided")) {
      spec.fstar.kind = FStarPolicy::Kind::provided;
      spec.fstar.value = get_or(*fs, "provided", 0.0);
    } else {
      throw InvalidArgument("fstar must be \"oracle\" or {\"provided\": value}");
    }
  }

  const auto solvers = j.find("solvers");
  if (solvers == j.end() || !solvers->is_array()) {
    throw InvalidArgument("experiment needs a 'solvers' array");
  }
  for (const auto& s : *solvers) spec.solvers.push_back(solver_spec_from_json(s));
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open experiment spec '" + path.string() + "'", 0);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("experiment spec '" + path.string() + "': " + e.what(), 0);
  }
  return parse_experiment_spec(j, path.parent_path());
}

GlmProblem build_problem(const ExperimentSpec& spec) {
  Dataset d = spec.dataset.builtin.empty() ? load_dataset(spec.dataset.path, spec.dataset.format)
                                           : builtin_quadratic();
  if (spec.link == Link::logistic) d.labels = to_logistic_labels(d.labels);
  return glm_build(d.a, spec.link, spec.alpha, d.labels);
}

Vector initial_point(const ExperimentSpec& spec, Index n) {
  Vector x = Vector::Zero(n);
  if (spec.init == "zeros") return x;
  std::mt19937_64 rng(spec.seed);
  for (Index i = 0; i < n; ++i) {
    // 53 random bits mapped to [-1, 1); identical on every platform
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x(i) = 2.0 * u - 1.0;
  }
  return x;
}

json to_json(const ContractionReport& report, const std::string& solver) {
  json steps = json::array();
  for (const auto& s : report.steps) {
    steps.push_back({{"k", s.k},
                     {"lhs", s.lhs},
                     {"bound", s.bound},
                     {"satisfied", s.satisfied},
                     {"vacuous", s.vacuous},
                     {"slack", s.slack},
                     {"xi", s.xi},
                     {"beta", s.beta},
                     {"eta", s.eta},
                     {"assumption_ok", s.assumption_ok}});
  }
  const bool penalty = report.kind == ContractionReport::Kind::penalty;
  return {{"solver", solver},
          {"kind", penalty ? "penalty" : "augmented"},
          {"mu", report.mu},
          {"step_L", report.step_L},
          {"certified", report.certified()},
          {"non_vacuous", report.non_vacuous()},
          {"worst_slack", number_or_null(report.worst_slack)},
          {"fraction_satisfied", report.fraction_satisfied},
          {"vacuous_count", report.vacuous_count},
          {"min_xi", number_or_null(report.min_xi)},
          {"min_beta", number_or_null(report.min_beta)},
          {"lyapunov_nonincreasing", report.lyapunov_nonincreasing},
          {"all_assumptions_ok", report.all_assumptions_ok},
          {"steps", std::move(steps)}};
}

namespace {

std::optional<ContractionReport> certify_trace(const IterateTrace& trace, const GlmProblem& problem,
                                               const SolverConfig& config) {
  const double mu = glm_constants(problem).mu;
  if (trace.method == Method::pnm) {
    return certify_pnm_contraction(trace, problem, config.precond, mu, config.step_L);
  }
  if (trace.method == Method::anm) {
    return certify_anm_lyapunov(trace, problem, config.precond, mu, config.step_L);
  }
  return std::nullopt;
}

json certification_aggregate(const json& cert) {
  json agg = cert;
  agg.erase("steps");
  agg.erase("solver");
  return agg;
}

SolverOutcome run_one(const ExperimentSpec& spec, const SolverSpec& solver,
                      const GlmProblem& problem, const Vector& x0, double f_star) {
  SolverOutcome outcome;
  json& e = outcome.entry;
  e["name"] = solver.name;
  e["config"] = to_json(solver);

  SolverConfig config = solver.config;
  if (!solver.step_L_given) config.step_L = glm_constants(problem).L;
  e["config"]["step_L"] = config.step_L;
  e["trace"] = solver.name + ".trace.csv";
  e["iterates"] = solver.name + ".iterates.csv";

  try {
    const IterateTrace trace = solve(problem, x0, config, f_star);
    if (!spec.out.empty()) {
      std::ostringstream tr;
      std::ostringstream it;
      write_trace_csv(tr, trace, spec.timing);
      write_iterates_csv(it, trace);
      write_file(spec.out / (solver.name + ".trace.csv"), tr.str());
      write_file(spec.out / (solver.name + ".iterates.csv"), it.str());
    }
    const auto& last = trace.back();
    e["status"] = "ok";
    e["termination"] = std::string(to_string(trace.termination));
    e["iterations"] = trace.iterations();
    const auto to_tol = iterations_to_tol(trace, config.grad_tol);
    e["iterations_to_tol"] = to_tol ? json(*to_tol) : json(nullptr);
    e["final_f"] = last.f;
    e["final_gap"] = last.f - f_star;
    e["final_grad_norm"] = last.grad_norm;
    e["certification"] = nullptr;
    e["error"] = nullptr;

    if (spec.diagnostics) {
      if (const auto report = certify_trace(trace, problem, config)) {
        const json cert = to_json(*report, solver.name);
        if (!spec.out.empty()) {
          write_file(spec.out / (solver.name + ".cert.json"), cert.dump(2) + "\n");
        }
        e["certification"] = certification_aggregate(cert);
      }
    }
    outcome.ok = true;
  } catch (const Error& err) {
    e["status"] = "failed";
    e["error"] = err.what();
  }
  return outcome;
}

}  // namespace

json run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const GlmProblem problem = build_problem(spec);
  const RelativeConstants constants = glm_constants(problem);
  const Vector x0 = initial_point(spec, problem.dimension());

  if (!spec.out.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(spec.out, ec);
    if (ec) throw ParseError("cannot create '" + spec.out.string() + "': " + ec.message(), 0);
  }

  int budget = 0;
  for (const auto& s : spec.solvers) budget = std::max(budget, s.config.max_iters);
  OptimumCache oracle;
  auto resolve_fstar = [&]() -> const OptimumEstimate& {
    return oracle.get([&] {
      if (spec.fstar.kind == FStarPolicy::Kind::provided) {
        return OptimumEstimate{Vector(), spec.fstar.value, 0.0, 0};
      }
      return optimum_oracle(problem, Vector::Zero(problem.dimension()), 1e-13, 100 * budget);
    });
  };

  std::vector<SolverOutcome> outcomes(spec.solvers.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < spec.solvers.size(); i = next++) {
      try {
        outcomes[i] = run_one(spec, spec.solvers[i], problem, x0, resolve_fstar().f);
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t n_workers = worker_count(spec.solvers.size());
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }

  json summary;
  json& p = summary["problem"];
  if (spec.dataset.builtin.empty()) {
    p["dataset"] = std::filesystem::absolute(spec.dataset.path).lexically_normal().string();
    p["builtin"] = nullptr;
  } else {
    p["dataset"] = nullptr;
    p["builtin"] = spec.dataset.builtin;
  }
  p["format"] = std::string(to_string(spec.dataset.format));
  p["link"] = std::string(to_string(spec.link));
  p["alpha"] = spec.alpha;
  p["n"] = problem.dimension();
  p["m"] = problem.samples();
  p["L"] = constants.L;
  p["mu"] = constants.mu;
  p["sigma_max_sq"] = constants.sigma_max_sq;
  summary["seed"] = spec.seed;
  summary["init"] = spec.init;
  summary["diagnostics"] = spec.diagnostics;
  summary["timing"] = spec.timing;

  if (fatal == nullptr) {
    const OptimumEstimate& fs = resolve_fstar();
    const bool oracle_used = spec.fstar.kind == FStarPolicy::Kind::oracle;
    summary["fstar"] = {{"policy", oracle_used ? "oracle" : "provided"},
                        {"value", fs.f},
                        {"grad_norm", oracle_used ? json(fs.grad_norm) : json(nullptr)},
                        {"iterations", oracle_used ? json(fs.iterations) : json(nullptr)}};
  } else {
    summary["fstar"] = nullptr;
  }

  json solvers = json::array();
  for (const auto& o : outcomes) {
    if (!o.entry.is_null()) solvers.push_back(o.entry);
  }
  summary["solvers"] = std::move(solvers);

  if (!spec.out.empty()) write_file(spec.out / "summary.json", summary.dump(2) + "\n");
  if (fatal) std::rethrow_exception(fatal);
  return summary;
}

json recertify(const std::filesystem::path& summary_path, const std::string& solver,
               const std::optional<std::filesystem::path>& dataset_override) {
  std::ifstream in(summary_path);
  if (!in) throw ParseError("cannot open summary '" + summary_path.string() + "'", 0);
  json summary;
  try {
    summary = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("summary '" + summary_path.string() + "': " + e.what(), 0);
  }

  const json* entry = nullptr;
  for (const auto& s : summary.at("solvers")) {
    if (s.at("name") == solver) entry = &s;
  }
  if (entry == nullptr) throw InvalidArgument("summary has no solver named '" + solver + "'");
  if (entry->at("status") != "ok") {
    throw InvalidArgument("solver '" + solver + "' did not finish; nothing to certify");
  }
  if (summary.at("fstar").is_null()) throw MissingOptimum("summary carries no f*");

  const json& p = summary.at("problem");
  ExperimentSpec spec;
  spec.link = parse_link(p.at("link").get<std::string>());
  spec.alpha = p.at("alpha").get<double>();
  spec.dataset.format = parse_format(p.at("format").get<std::string>());
  if (dataset_override) {
    spec.dataset.path = *dataset_override;
  } else if (!p.at("builtin").is_null()) {
    spec.dataset.builtin = p.at("builtin").get<std::string>();
  } else {
    spec.dataset.path = p.at("dataset").get<std::string>();
  }
  const GlmProblem problem = build_problem(spec);
  if (problem.dimension() != p.at("n").get<Index>() || problem.samples() != p.at("m").get<Index>()) {
    throw BadShape("dataset shape differs from the one recorded in the summary");
  }

  const SolverSpec solver_spec = solver_spec_from_json(entry->at("config"));
  const double f_star = summary.at("fstar").at("value").get<double>();
  const auto dir = summary_path.parent_path();

  std::ifstream trace_in(dir / entry->at("trace").get<std::string>());
  std::ifstream iter_in(dir / entry->at("iterates").get<std::string>());
  if (!trace_in || !iter_in) throw ParseError("cannot open trace files of '" + solver + "'", 0);
  const IterateTrace trace = rebuild_trace(solver_spec.config.method, solver_spec.config.step_L,
                                           f_star, read_trace_csv(trace_in),
                                           read_iterates_csv(iter_in));
  for (const auto& r : trace.records) {
    const double f = problem.value(r.x);
    if (std::abs(f - r.f) > 1e-9 * (1.0 + std::abs(f))) {
      throw InvalidArgument("iterate " + std::to_string(r.k) +
                            " does not reproduce the recorded f; wrong dataset?");
    }
  }
  const auto report = certify_trace(trace, problem, solver_spec.config);
  if (!report) {
    throw InvalidArgument("method '" + std::string(to_string(solver_spec.config.method)) +
                          "' has no rate certificate");
  }
  return to_json(*report, solver);
}

}  // namespace pnewton
