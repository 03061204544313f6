#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pnewton/diagnostics.hpp"

namespace pnewton {

// ---- datasets ----

enum class DataFormat { csv, libsvm };

DataFormat parse_format(std::string_view name);
std::string_view to_string(DataFormat format);

/// Columns of `a` are samples (n features x m samples).
struct Dataset {
  Matrix a;
  Vector labels;
};

/// csv: one sample per line, numeric features, label in the last column.
/// libsvm: "label idx:value ..." with 1-based indices, densified to
/// `num_features` rows (default: the largest index seen).
/// Blank lines and lines starting with '#' are skipped. Throws ParseError
/// naming the offending line and EmptyDataset when no sample is found.
Dataset parse_dataset(std::istream& in, DataFormat format,
                      std::optional<Index> num_features = std::nullopt);
Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     std::optional<Index> num_features = std::nullopt);

/// Maps {0,1} or {-1,+1} labels to {-1,+1}; anything else is BadLabel.
Vector to_logistic_labels(const Vector& raw);

/// Small squared-link problem shipped with the tool (3 features, 4 samples).
Dataset builtin_quadratic();

// ---- experiments ----

struct SolverSpec {
  std::string name;
  SolverConfig config;
  bool step_L_given = false;  // otherwise the problem's relative L is used
};

struct DatasetSource {
  std::string builtin;  // "quadratic" or empty
  std::filesystem::path path;
  DataFormat format = DataFormat::csv;
};

struct FStarPolicy {
  enum class Kind { oracle, provided };
  Kind kind = Kind::oracle;
  double value = 0.0;
};

struct ExperimentSpec {
  DatasetSource dataset;
  Link link = Link::logistic;
  double alpha = 0.1;
  std::vector<SolverSpec> solvers;
  std::uint64_t seed = 0;
  std::string init = "random";  // "random" (seeded, uniform in [-1,1]) or "zeros"
  std::filesystem::path out;    // empty: nothing is written
  bool diagnostics = false;
  bool timing = false;          // elapsed_ns column is 0 unless set
  FStarPolicy fstar;

  void validate() const;
};

/// Relative paths inside the JSON are resolved against `base_dir`.
ExperimentSpec parse_experiment_spec(const nlohmann::json& j,
                                     const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

nlohmann::json to_json(const SolverSpec& spec);
SolverSpec solver_spec_from_json(const nlohmann::json& j);

/// Assembled problem of an experiment (data loaded, labels normalized).
GlmProblem build_problem(const ExperimentSpec& spec);

Vector initial_point(const ExperimentSpec& spec, Index n);

/// Runs every solver (in parallel, capped by PN_THREADS), writing
/// <out>/<name>.trace.csv, <out>/<name>.iterates.csv, optionally
/// <out>/<name>.cert.json, and <out>/summary.json. Solver failures are
/// recorded in the summary ("status": "failed") instead of thrown.
nlohmann::json run_experiment(const ExperimentSpec& spec);

// ---- trace files ----

inline constexpr const char* kTraceHeader = "k,f,gap,grad_norm,rho,step_norm_G,lyapunov,elapsed_ns";

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

void write_trace_csv(std::ostream& out, const IterateTrace& trace, bool timing);
void write_iterates_csv(std::ostream& out, const IterateTrace& trace);

struct TraceRow {
  int k = 0;
  double f = 0.0;
  std::optional<double> gap;
  double grad_norm = 0.0;
  double rho = 0.0;
  double step_norm_G = 0.0;
  std::optional<double> lyapunov;
  std::int64_t elapsed_ns = 0;
};

/// Parses and validates a trace file (header, contiguous k from 0).
std::vector<TraceRow> read_trace_csv(std::istream& in);
std::vector<Vector> read_iterates_csv(std::istream& in);

/// Rebuilds an in-memory trace from the two files written by a run.
IterateTrace rebuild_trace(Method method, double step_L, std::optional<double> f_star,
                           const std::vector<TraceRow>& rows, const std::vector<Vector>& iterates);

nlohmann::json to_json(const ContractionReport& report, const std::string& solver);

/// Re-runs certification for one solver of a finished experiment from its
/// summary, dataset and iterate files.
nlohmann::json recertify(const std::filesystem::path& summary_path, const std::string& solver,
                         const std::optional<std::filesystem::path>& dataset_override = {});

// ---- scalar polynomials ----

/// Single-variable polynomial with integer powers, e.g. "3x^3 - 2*x + 1".
class Polynomial {
 public:
  static Polynomial parse(std::string_view text);

  double operator()(double x) const;
  Polynomial derivative() const;
  const std::map<int, double>& coefficients() const noexcept { return coeffs_; }

 private:
  std::map<int, double> coeffs_;  // power -> coefficient
};

// ---- command line ----

/// Entry point of the `pnewton` tool. Exit codes: 0 success, 1 solver
/// failure, 2 usage or I/O error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pnewton
