#include "pnewton/objective.hpp"

#include <cmath>
#include <string>

namespace pnewton {

namespace {

constexpr double kBoundSlack = 1e-9;

// log(1 + exp(z)) without overflow for large |z|.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// 1 / (1 + exp(-z))
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_dimension(const Objective& model, const Vector& x) {
  if (x.size() != model.dimension()) {
    throw BadShape("point has length " + std::to_string(x.size()) + ", expected " +
                   std::to_string(model.dimension()));
  }
}

}  // namespace

FunctionObjective::FunctionObjective(Index n, ValueFn value, GradientFn gradient,
                                     HessianFn hessian, std::optional<RelativeBounds> constants,
                                     std::optional<KnownOptimum> optimum)
    : n_(n),
      value_(std::move(value)),
      gradient_(std::move(gradient)),
      hessian_(std::move(hessian)),
      constants_(constants),
      optimum_(std::move(optimum)) {
  if (n_ < 1) throw InvalidArgument("objective dimension must be positive");
  if (constants_ && !(constants_->mu > 0.0 && constants_->mu <= constants_->L)) {
    throw InvalidArgument("relative constants need 0 < mu <= L");
  }
}

QuadraticObjective::QuadraticObjective(SymMatrix q)
    : QuadraticObjective(q, Vector::Zero(q.order())) {}

QuadraticObjective::QuadraticObjective(SymMatrix q, Vector b) : q_(std::move(q)), b_(std::move(b)) {
  if (b_.size() != q_.order()) throw BadShape("linear term does not match matrix order");
  const auto eig = sym_eig(q_);
  if (eig.eigenvalues.size() && eig.eigenvalues(0) > 0.0) {
    Vector xstar = spd_solve(q_, b_);
    optimum_ = KnownOptimum{xstar, value(xstar)};
  }
}

double QuadraticObjective::value(const Vector& x) const {
  return 0.5 * x.dot(q_.matrix() * x) - b_.dot(x);
}

Vector QuadraticObjective::gradient(const Vector& x) const { return q_.matrix() * x - b_; }

std::string_view to_string(Link link) {
  switch (link) {
    case Link::logistic: return "logistic";
    case Link::squared: return "squared";
  }
  return "unknown";
}

Link parse_link(std::string_view name) {
  if (name == "logistic") return Link::logistic;
  if (name == "squared") return Link::squared;
  throw InvalidArgument("unknown link '" + std::string(name) + "'");
}

GlmProblem::GlmProblem(Matrix a, Link link, double alpha, std::optional<Vector> labels)
    : a_(std::move(a)), link_(link), alpha_(alpha) {
  if (a_.rows() < 1 || a_.cols() < 1) throw BadShape("data matrix must be at least 1x1");
  if (!a_.allFinite()) throw InvalidArgument("data matrix has non-finite entries");
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) {
    throw InvalidArgument("regularization alpha must be positive");
  }

  const Index m = a_.cols();
  if (labels) {
    if (labels->size() != m) {
      throw BadShape("got " + std::to_string(labels->size()) + " labels for " +
                     std::to_string(m) + " samples");
    }
    if (!labels->allFinite()) throw BadLabel("labels must be finite");
    if (link_ == Link::logistic) {
      for (Index i = 0; i < m; ++i) {
        const double y = (*labels)(i);
        if (y != 1.0 && y != -1.0) {
          throw BadLabel("logistic label " + std::to_string(y) + " at sample " +
                         std::to_string(i) + " is not in {-1,+1}");
        }
      }
    }
    y_ = *labels;
  } else {
    y_ = link_ == Link::logistic ? Vector::Ones(m) : Vector::Zero(m);
  }

  const auto [u, ell] = curvature_bounds();
  constants_.u = u;
  constants_.ell = ell;
  constants_.sigma_max_sq = sigma_max_sq(a_);
  const double m_alpha = static_cast<double>(m) * alpha_;
  const double s = constants_.sigma_max_sq;
  constants_.L = (ell * s + m_alpha) / (u * s + m_alpha);
  constants_.mu = (u * s + m_alpha) / (ell * s + m_alpha);
}

std::pair<double, double> GlmProblem::curvature_bounds() const {
  return link_ == Link::logistic ? std::pair{0.0, 0.25} : std::pair{1.0, 1.0};
}

double GlmProblem::value(const Vector& x) const {
  require_dimension(*this, x);
  const Vector t = a_.transpose() * x;
  double loss = 0.0;
  if (link_ == Link::logistic) {
    for (Index i = 0; i < t.size(); ++i) loss += softplus(-y_(i) * t(i));
  } else {
    loss = 0.5 * (t - y_).squaredNorm();
  }
  return loss / static_cast<double>(samples()) + 0.5 * alpha_ * x.squaredNorm();
}

Vector GlmProblem::gradient(const Vector& x) const {
  require_dimension(*this, x);
  const Vector t = a_.transpose() * x;
  Vector dphi(t.size());
  if (link_ == Link::logistic) {
    for (Index i = 0; i < t.size(); ++i) dphi(i) = -y_(i) * sigmoid(-y_(i) * t(i));
  } else {
    dphi = t - y_;
  }
  return a_ * dphi / static_cast<double>(samples()) + alpha_ * x;
}

SymMatrix GlmProblem::hessian(const Vector& x) const {
  require_dimension(*this, x);
  const Vector t = a_.transpose() * x;
  Vector d2phi(t.size());
  if (link_ == Link::logistic) {
    for (Index i = 0; i < t.size(); ++i) {
      const double s = sigmoid(t(i));
      d2phi(i) = s * (1.0 - s);
    }
  } else {
    d2phi.setOnes();
  }
  Matrix h = a_ * d2phi.asDiagonal() * a_.transpose() / static_cast<double>(samples());
  h.diagonal().array() += alpha_;
  return SymMatrix::symmetrize(h);
}

std::optional<RelativeBounds> GlmProblem::known_constants() const {
  return RelativeBounds{constants_.L, constants_.mu};
}

GlmProblem glm_build(const Matrix& a, Link link, double alpha,
                     const std::optional<Vector>& labels) {
  return GlmProblem(a, link, alpha, labels);
}

RelativeConstants glm_constants(const GlmProblem& problem) { return problem.constants_; }

double sigma_max_sq(const Matrix& a) {
  const auto eig = sym_eig(SymMatrix::symmetrize(a * a.transpose()));
  return std::max(eig.eigenvalues.maxCoeff(), 0.0);
}

double default_fd_step(const Vector& x) { return 1e-6 * (1.0 + x.norm()); }

Vector fd_gradient(const Objective& model, const Vector& x, double h) {
  require_dimension(model, x);
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  Vector g(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double plus = model.value(probe);
    probe(i) = x(i) - h;
    const double minus = model.value(probe);
    probe(i) = x(i);
    g(i) = (plus - minus) / (2.0 * h);
  }
  return g;
}

SymMatrix fd_hessian(const Objective& model, const Vector& x, double h) {
  require_dimension(model, x);
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  const Index n = x.size();
  Matrix hess(n, n);
  Vector probe = x;
  for (Index j = 0; j < n; ++j) {
    probe(j) = x(j) + h;
    const Vector plus = model.gradient(probe);
    probe(j) = x(j) - h;
    const Vector minus = model.gradient(probe);
    probe(j) = x(j);
    hess.col(j) = (plus - minus) / (2.0 * h);
  }
  return SymMatrix::symmetrize(hess);
}

RelativeBoundsCheck check_relative_bounds(const Objective& model, const Vector& x,
                                          const Vector& y, double L, double mu) {
  require_dimension(model, x);
  require_dimension(model, y);
  const Vector d = x - y;
  const double gap = model.value(x) - model.value(y) - model.gradient(y).dot(d);
  const double curvature = weighted_norm_sq(d, model.hessian(y));

  RelativeBoundsCheck out;
  out.slack_upper = 0.5 * L * curvature - gap;
  out.slack_lower = gap - 0.5 * mu * curvature;
  out.ok_upper = out.slack_upper >= -kBoundSlack;
  out.ok_lower = out.slack_lower >= -kBoundSlack;
  return out;
}

bool in_level_set(const Objective& model, const Vector& x, const Vector& y, const Vector& x0,
                  const Vector& y0, double L, double rho, const SymMatrix& g) {
  if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
  const double scale = L / (2.0 * rho);
  const double here = model.value(x) + scale * weighted_norm_sq(x - y, g);
  const double anchor = model.value(x0) + scale * weighted_norm_sq(x0 - y0, g);
  return here <= anchor + kBoundSlack;
}

}  // namespace pnewton
