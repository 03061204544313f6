#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>

#include "pnewton/linalg.hpp"

namespace pnewton {

/// Relative smoothness / convexity constants measured in the local Hessian
/// norm: for anchor y, f(x) - f(y) - <grad f(y), x - y> lies between
/// (mu/2)|x-y|^2_{H(y)} and (L/2)|x-y|^2_{H(y)}.
struct RelativeBounds {
  double L = 1.0;
  double mu = 1.0;
};

struct KnownOptimum {
  Vector x;
  double f = 0.0;
};

/// A twice differentiable objective over R^n.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual Index dimension() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual SymMatrix hessian(const Vector& x) const = 0;

  virtual std::optional<RelativeBounds> known_constants() const { return std::nullopt; }
  virtual std::optional<KnownOptimum> known_optimum() const { return std::nullopt; }
};

/// Objective assembled from callables; used for ad-hoc test functions.
class FunctionObjective final : public Objective {
 public:
  using ValueFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;
  using HessianFn = std::function<SymMatrix(const Vector&)>;

  FunctionObjective(Index n, ValueFn value, GradientFn gradient, HessianFn hessian,
                    std::optional<RelativeBounds> constants = std::nullopt,
                    std::optional<KnownOptimum> optimum = std::nullopt);

  Index dimension() const override { return n_; }
  double value(const Vector& x) const override { return value_(x); }
  Vector gradient(const Vector& x) const override { return gradient_(x); }
  SymMatrix hessian(const Vector& x) const override { return hessian_(x); }
  std::optional<RelativeBounds> known_constants() const override { return constants_; }
  std::optional<KnownOptimum> known_optimum() const override { return optimum_; }

 private:
  Index n_;
  ValueFn value_;
  GradientFn gradient_;
  HessianFn hessian_;
  std::optional<RelativeBounds> constants_;
  std::optional<KnownOptimum> optimum_;
};

/// f(x) = 1/2 x^T Q x - b^T x with Q PSD. Relative constants are L = mu = 1
/// (second-order Taylor expansion is exact). The optimum is known when Q is
/// positive definite.
class QuadraticObjective final : public Objective {
 public:
  explicit QuadraticObjective(SymMatrix q);
  QuadraticObjective(SymMatrix q, Vector b);

  Index dimension() const override { return q_.order(); }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  SymMatrix hessian(const Vector&) const override { return q_; }
  std::optional<RelativeBounds> known_constants() const override { return RelativeBounds{}; }
  std::optional<KnownOptimum> known_optimum() const override { return optimum_; }

 private:
  SymMatrix q_;
  Vector b_;
  std::optional<KnownOptimum> optimum_;
};

enum class Link { logistic, squared };

std::string_view to_string(Link link);
Link parse_link(std::string_view name);

/// Constants of a regularized generalized linear model together with the
/// curvature bounds u <= phi'' <= ell they were derived from.
struct RelativeConstants {
  double L = 1.0;
  double mu = 1.0;
  double u = 0.0;
  double ell = 0.0;
  double sigma_max_sq = 0.0;
};

/// f(x) = (1/m) sum_i phi_i(a_i^T x) + (alpha/2)|x|^2 where a_i are the
/// columns of the n x m data matrix A.
///
/// logistic: phi_i(t) = log(1 + exp(-y_i t)), labels y_i in {-1,+1}
///           (all +1 when no labels are given); u = 0, ell = 1/4.
/// squared:  phi_i(t) = (t - y_i)^2 / 2 (y_i = 0 without labels); u = ell = 1.
///
/// The Hessian (1/m) A diag(phi''(A^T x)) A^T + alpha I is positive definite
/// everywhere, so the gradient always lies in its range.
class GlmProblem final : public Objective {
 public:
  GlmProblem(Matrix a, Link link, double alpha, std::optional<Vector> labels = std::nullopt);

  Index dimension() const override { return a_.rows(); }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  SymMatrix hessian(const Vector& x) const override;
  std::optional<RelativeBounds> known_constants() const override;

  const Matrix& data() const noexcept { return a_; }
  const Vector& labels() const noexcept { return y_; }
  Link link() const noexcept { return link_; }
  double alpha() const noexcept { return alpha_; }
  Index samples() const noexcept { return a_.cols(); }

  /// phi'' bounds (u, ell) for this link.
  std::pair<double, double> curvature_bounds() const;

 private:
  Matrix a_;
  Link link_;
  double alpha_;
  Vector y_;
  RelativeConstants constants_;

  friend RelativeConstants glm_constants(const GlmProblem&);
};

/// Validates inputs and builds the problem. Throws BadShape on dimension
/// mismatch, BadLabel for logistic labels outside {-1,+1}, InvalidArgument for
/// alpha <= 0 or non-finite data.
GlmProblem glm_build(const Matrix& a, Link link, double alpha,
                     const std::optional<Vector>& labels = std::nullopt);

/// L = (ell s + m alpha)/(u s + m alpha), mu = 1/L where s = sigma_max(A)^2.
RelativeConstants glm_constants(const GlmProblem& problem);

/// sigma_max(A)^2 from the largest eigenvalue of A A^T.
double sigma_max_sq(const Matrix& a);

double default_fd_step(const Vector& x);

/// Central differences of the value, componentwise.
Vector fd_gradient(const Objective& model, const Vector& x, double h);
inline Vector fd_gradient(const Objective& model, const Vector& x) {
  return fd_gradient(model, x, default_fd_step(x));
}

/// Central differences of the analytic gradient, symmetrized.
SymMatrix fd_hessian(const Objective& model, const Vector& x, double h);
inline SymMatrix fd_hessian(const Objective& model, const Vector& x) {
  return fd_hessian(model, x, default_fd_step(x));
}

struct RelativeBoundsCheck {
  bool ok_upper = false;
  bool ok_lower = false;
  double slack_upper = 0.0;  // (L/2)|x-y|^2_H(y) - D, nonnegative when the bound holds
  double slack_lower = 0.0;  // D - (mu/2)|x-y|^2_H(y)
};

/// Evaluates the relative smoothness/convexity sandwich at the pair (x, y)
/// with 1e-9 absolute slack allowed on either side.
RelativeBoundsCheck check_relative_bounds(const Objective& model, const Vector& x,
                                          const Vector& y, double L, double mu);

/// Membership of the pair (x, y) in the level set of
/// f(x) + (L/2rho)|x - y|^2_G anchored at (x0, y0), with 1e-9 slack.
bool in_level_set(const Objective& model, const Vector& x, const Vector& y, const Vector& x0,
                  const Vector& y0, double L, double rho, const SymMatrix& g);

/// Numerically obtained minimizer with the provenance of how it was found.
struct OptimumEstimate {
  Vector x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// Write-once holder for an expensive optimum estimate. Concurrent callers
/// block until the first computation finishes and then all observe it.
class OptimumCache {
 public:
  template <class Compute>
  const OptimumEstimate& get(Compute&& compute) {
    std::call_once(once_, [&] { value_ = std::forward<Compute>(compute)(); });
    return *value_;
  }

 private:
  std::once_flag once_;
  std::optional<OptimumEstimate> value_;
};

}  // namespace pnewton
