#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "pnewton/objective.hpp"

namespace pnewton {

/// Choice of the positive definite weighting G of the penalty term.
/// identity yields the Levenberg update; hessian_diagonal re-evaluates
/// G_k = diag(H(x_k)) at every iterate and yields Levenberg-Marquardt.
class PreconditionerPolicy {
 public:
  enum class Kind { identity, hessian_diagonal, fixed };

  static PreconditionerPolicy identity() { return PreconditionerPolicy(Kind::identity); }
  static PreconditionerPolicy hessian_diagonal() {
    return PreconditionerPolicy(Kind::hessian_diagonal);
  }
  /// Throws NotPositiveDefinite unless every eigenvalue of g is positive.
  static PreconditionerPolicy fixed(SymMatrix g);

  Kind kind() const noexcept { return kind_; }

  /// G for an iterate whose Hessian is `h`.
  SymMatrix realize(const SymMatrix& h) const;

 private:
  explicit PreconditionerPolicy(Kind kind) : kind_(kind) {}

  Kind kind_;
  std::optional<SymMatrix> fixed_;
};

std::string_view to_string(PreconditionerPolicy::Kind kind);

/// rho_k = min(rho0 * c^k, rho_max).
struct PenaltySchedule {
  double rho0 = 1.0;
  double c = 2.0;
  double rho_max = 1e12;

  double at(int k) const;
  void validate() const;

  static PenaltySchedule constant(double rho) { return {rho, 1.0, rho}; }
};

enum class Method { newton, damped_newton, pnm, anm };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);

struct BacktrackingParams {
  double alpha = 0.25;  // sufficient decrease, in (0, 1/2]
  double beta = 0.5;    // shrink factor, in (0, 1)
};

struct SolverConfig {
  Method method = Method::pnm;
  PreconditionerPolicy precond = PreconditionerPolicy::identity();
  PenaltySchedule schedule;
  double step_L = 1.0;  // steps are scaled by 1/step_L
  int max_iters = 500;
  double grad_tol = 1e-8;
  BacktrackingParams backtracking;

  void validate() const;
};

enum class Termination { converged, max_iters };

std::string_view to_string(Termination t);

struct IterateRecord {
  int k = 0;
  Vector x;
  double f = 0.0;
  double grad_norm = 0.0;
  double rho = 0.0;             // penalty used for the step leaving x_k
  double step_norm_G_sq = 0.0;  // |x_k - x_{k-1}|^2_{G_k}, 0 for the first record
  std::optional<double> lyapunov;
  std::int64_t elapsed_ns = 0;
};

struct IterateTrace {
  Method method = Method::newton;
  double step_L = 1.0;
  std::optional<double> f_star;
  std::vector<IterateRecord> records;
  Termination termination = Termination::max_iters;

  /// Number of update steps taken (records after the initial point(s)).
  int iterations() const;
  const IterateRecord& back() const { return records.back(); }
};

/// Multiplier estimate of the augmented system, z_k = x_{k-1} - x_k.
struct DualState {
  Vector z;
  Vector u;  // scratch: (rho/L) grad f(x_k) + G z_k from the last step
};

// ---- single steps ----

/// x - (1/step_L) H^+(x) grad f(x). Throws RangeViolation when grad f(x) is
/// not in the range of H(x) to relative tolerance 1e-8.
Vector newton_step(const Objective& model, const Vector& x, double step_L);

/// x - (1/step_L) ((1/rho) G + H(x))^{-1} grad f(x)
Vector pnm_step(const Objective& model, const Vector& x, double rho, const SymMatrix& g,
                double step_L);

struct DualStep {
  Vector x_next;
  DualState dual_next;
};

/// Multiplier form: u = (rho/L) grad f + G z, z' = (1/rho) K u, x' = x - z'.
DualStep anm_step_dual(const Objective& model, const Vector& x, const DualState& dual,
                       double rho, const SymMatrix& g, double step_L);

/// Momentum form: x - ((1/rho) G + H)^{-1} [ (1/L) grad f - (1/rho) G (x - x_prev) ].
Vector anm_step_momentum(const Objective& model, const Vector& x, const Vector& x_prev,
                         double rho, const SymMatrix& g, double step_L);

// ---- full runs ----
//
// Traces start with the initial point at k = 0 (ANM traces also carry x1 at
// k = 1). Each run stops once |grad f| <= grad_tol (ANM additionally needs
// |x_k - x_{k-1}|_G <= grad_tol) or after max_iters steps.

IterateTrace newton_run(const Objective& model, const Vector& x0, const SolverConfig& config,
                        std::optional<double> f_star = std::nullopt);

/// Newton with backtracking on the Newton decrement. Throws LineSearchStall
/// if the step shrinks below 1e-16 or the required decrease drops below the
/// resolution of f while the decrement itself is still resolvable.
IterateTrace damped_newton_run(const Objective& model, const Vector& x0,
                               const SolverConfig& config,
                               std::optional<double> f_star = std::nullopt);

IterateTrace pnm_run(const Objective& model, const Vector& x0, const SolverConfig& config,
                     std::optional<double> f_star = std::nullopt);

/// Records the Lyapunov value f(x_k) - f* + (L/2rho_k)|x_k - x_{k-1}|^2_G
/// when f_star is given.
IterateTrace anm_run(const Objective& model, const Vector& x0, const Vector& x1,
                     const SolverConfig& config, std::optional<double> f_star = std::nullopt);

/// Same iteration driven through the multiplier form, z_1 = x0 - x1. The
/// returned duals hold z_k for every record k >= 1.
struct DualTrace {
  IterateTrace trace;
  std::vector<Vector> multipliers;
};
DualTrace anm_run_dual(const Objective& model, const Vector& x0, const Vector& x1,
                       const SolverConfig& config, std::optional<double> f_star = std::nullopt);

/// Dispatches on config.method. ANM starts from x1 = x0.
IterateTrace solve(const Objective& model, const Vector& x0, const SolverConfig& config,
                   std::optional<double> f_star = std::nullopt);

/// Damped Newton driven to |grad f| <= grad_tol; used as the reference
/// minimizer when no analytic optimum exists.
OptimumEstimate optimum_oracle(const Objective& model, const Vector& x0,
                               double grad_tol = 1e-13, int max_iters = 50000);

}  // namespace pnewton
