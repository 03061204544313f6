#pragma once

#include <optional>
#include <vector>

#include "pnewton/solvers.hpp"

namespace pnewton {

// Spectral objects of the penalized Newton system at a single iterate:
//
//   K    = ((1/rho) G + H)^{-1}
//   Lmat = H^{1/2} ((1/rho) I + H^{1/2} G^{-1} H^{1/2})^{-1} H^{1/2}
//   xi   = smallest nonzero eigenvalue of H^{1/2} K H^{1/2}
//        = rho l / (1 + rho l),  l = lambda_min^+(G^{-1/2} H G^{-1/2})
//   beta = lambda_min(K^{1/2} G K^{1/2})
//   Theta = (1/rho) K G  (momentum matrix of the augmented update)

SymMatrix compute_K(const SymMatrix& h, const SymMatrix& g, double rho);

/// Evaluated from its own definition, independently of compute_K.
SymMatrix compute_Lmat(const SymMatrix& h, const SymMatrix& g, double rho);

/// xi through the whitened Hessian G^{-1/2} H G^{-1/2}. Throws ZeroHessian
/// when H has no nonzero eigenvalue.
double compute_xi(const SymMatrix& h, const SymMatrix& g, double rho,
                  double rank_tol = kDefaultRankTol);

/// xi as lambda_min^+(H^{1/2} K H^{1/2}); second route for cross-checks.
double compute_xi_from_K(const SymMatrix& h, const SymMatrix& g, double rho,
                         double rank_tol = kDefaultRankTol);

double compute_beta(const SymMatrix& h, const SymMatrix& g, double rho);

Matrix momentum_matrix(const SymMatrix& h, const SymMatrix& g, double rho);

struct SpectralDiagnostics {
  SymMatrix K;
  SymMatrix Lmat;
  double xi = 0.0;
  double beta = 0.0;
  Matrix theta;
  double rho = 0.0;
  Vector at_x;
};

SpectralDiagnostics spectral_snapshot(const Objective& model, const Vector& x,
                                      const SymMatrix& g, double rho);

// ---- identity checks ----

/// Residuals of  H K = I - (1/rho) G K  and  G K G = rho G - rho Lmat.
struct InverseIdentityCheck {
  bool ok = false;
  double residual_hk = 0.0;   // |H K - (I - G K / rho)|_F
  double residual_gkg = 0.0;  // |G K G - rho G + rho Lmat|_F
  double gkg_scale = 0.0;     // 1 + |G|_F^2, the scale applied to residual_gkg
};

InverseIdentityCheck verify_inverse_identities(const SymMatrix& h, const SymMatrix& g,
                                               const SymMatrix& k, const SymMatrix& lmat,
                                               double rho, double tol);
InverseIdentityCheck verify_inverse_identities(const SymMatrix& h, const SymMatrix& g, double rho,
                                               double tol);

/// H^{1/2} K H^{1/2} and G^{-1/2} Lmat G^{-1/2} share their nonzero spectrum.
struct SpectralEquivalenceCheck {
  bool ok = false;
  Vector from_K;
  Vector from_Lmat;
  double max_diff = 0.0;
};

SpectralEquivalenceCheck verify_spectral_equivalence(const SymMatrix& h, const SymMatrix& g,
                                                     double rho, double tol,
                                                     double rank_tol = kDefaultRankTol);

struct InequalityCheck {
  bool holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // lhs - rhs
  bool precondition_met = true;
};

/// |grad f|^2_K >= xi(x) |grad f|^2_{H^+} - tol.
InequalityCheck verify_gradient_bound(const Objective& model, const Vector& x,
                                      const SymMatrix& g, double rho, double tol);

/// |x - x_prev|^2_Lmat >= xi(x) |x - x_prev|^2_G - tol. Requires H PD or
/// G (x - x_prev) in Range(H) (projection residual <= 1e-8); the result
/// reports precondition_met = false otherwise.
InequalityCheck verify_step_bound(const Vector& x, const Vector& x_prev, const SymMatrix& h,
                                  const SymMatrix& g, double rho, double tol);

/// Augmented-method Lyapunov value f(x) - f* + (L/2rho)|x - x_prev|^2_G.
double lyapunov(double f_x, double f_star, const Vector& x, const Vector& x_prev,
                const SymMatrix& g, double rho, double step_L);

// ---- rate certification ----

struct ContractionStep {
  int k = 0;
  double lhs = 0.0;    // achieved ratio of consecutive gaps (or Lyapunov values)
  double bound = 0.0;  // certified factor
  bool satisfied = false;
  bool vacuous = false;
  double slack = 0.0;  // bound * prev + 1e-12 - next
  double xi = 0.0;
  double beta = 0.0;   // penalty-method certificate only
  double eta = 0.0;    // 1 - bound
  bool assumption_ok = true;  // augmented-method range condition at x_k
};

struct ContractionReport {
  enum class Kind { penalty, augmented };

  Kind kind = Kind::penalty;
  double mu = 0.0;
  double step_L = 0.0;
  std::vector<ContractionStep> steps;

  double worst_slack = 0.0;
  double fraction_satisfied = 1.0;
  int vacuous_count = 0;
  double min_xi = 0.0;
  double min_beta = 0.0;
  bool lyapunov_nonincreasing = true;  // augmented-method only
  bool all_assumptions_ok = true;

  /// Every step satisfied or explicitly vacuous.
  bool certified() const;
  /// Every step satisfied and none vacuous.
  bool non_vacuous() const;
};

/// Per-iteration check of f(x_{k+1}) - f* <= (1 - eta_k)(f(x_k) - f*) for a
/// penalty-method trace, eta_k = mu xi_k (beta_k + rho_k) / (rho_k L).
/// Steps with eta_k outside (0, 1] are flagged vacuous.
ContractionReport certify_pnm_contraction(const IterateTrace& trace, const Objective& model,
                                          const PreconditionerPolicy& policy, double mu,
                                          double step_L);

/// Per-iteration check of V_{k+1}(rho_k) <= (1 - xi_k mu / L) V_k(rho_k)
/// for an augmented-method trace.
ContractionReport certify_anm_lyapunov(const IterateTrace& trace, const Objective& model,
                                       const PreconditionerPolicy& policy, double mu,
                                       double step_L);

}  // namespace pnewton
