#include "pnewton/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace pnewton {

namespace {

constexpr double kCertSlack = 1e-12;
constexpr double kRangeTol = 1e-8;

void require_inputs(const SymMatrix& h, const SymMatrix& g, double rho) {
  if (h.order() != g.order()) throw BadShape("H and G must have the same order");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidArgument("rho must be positive and finite");
}

SymMatrix congruence(const SymMatrix& outer, const SymMatrix& inner) {
  return SymMatrix::symmetrize(outer.matrix() * inner.matrix() * outer.matrix());
}

double xi_map(double lambda, double rho) { return rho * lambda / (1.0 + rho * lambda); }

// Whether G d lies in Range(H) up to the projection residual tolerance.
bool in_hessian_range(const SymMatrix& h, const Vector& v) {
  const Vector projected = h.matrix() * pinv_apply(h, v);
  return (projected - v).norm() <= kRangeTol * (1.0 + v.norm());
}

bool positive_definite(const SymMatrix& h) {
  const auto eig = sym_eig(h);
  return eig.eigenvalues.size() && eig.eigenvalues(0) > 0.0;
}

double gap_of(const IterateRecord& r, double f_star) { return r.f - f_star; }

void summarize(ContractionReport& report) {
  if (report.steps.empty()) {
    report.worst_slack = 0.0;
    report.fraction_satisfied = 1.0;
    return;
  }
  int satisfied = 0;
  report.worst_slack = std::numeric_limits<double>::infinity();
  report.min_xi = std::numeric_limits<double>::infinity();
  report.min_beta = std::numeric_limits<double>::infinity();
  for (const auto& s : report.steps) {
    satisfied += s.satisfied ? 1 : 0;
    report.vacuous_count += s.vacuous ? 1 : 0;
    report.worst_slack = std::min(report.worst_slack, s.slack);
    report.min_xi = std::min(report.min_xi, s.xi);
    report.min_beta = std::min(report.min_beta, s.beta);
    report.all_assumptions_ok = report.all_assumptions_ok && s.assumption_ok;
  }
  if (report.kind == ContractionReport::Kind::augmented) report.min_beta = 0.0;
  report.fraction_satisfied =
      static_cast<double>(satisfied) / static_cast<double>(report.steps.size());
}

// K and Lmat are formed in extended precision. The identities relating them
// scale forward errors by rho, which double-precision inversion cannot absorb
// once rho * cond(H) approaches 1e6.
using XMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

XMatrix widen(const Matrix& m) { return m.cast<long double>(); }

SymMatrix narrow(const XMatrix& m) {
  return SymMatrix::symmetrize(Matrix((0.5L * (m + m.transpose())).cast<double>()));
}

std::optional<XMatrix> x_spd_inverse(const XMatrix& a) {
  Eigen::LLT<XMatrix> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return XMatrix(llt.solve(XMatrix::Identity(a.rows(), a.cols())));
}

XMatrix x_psd_sqrt(const XMatrix& m) {
  Eigen::SelfAdjointEigenSolver<XMatrix> eig(m);
  if (eig.info() != Eigen::Success) throw ConvergenceFailure("symmetric eigensolver did not converge");
  const auto& w = eig.eigenvalues();
  const long double top = w.cwiseAbs().maxCoeff();
  const long double zero =
      static_cast<long double>(w.size()) * std::numeric_limits<long double>::epsilon() * top;
  Eigen::Matrix<long double, Eigen::Dynamic, 1> roots(w.size());
  for (Index i = 0; i < w.size(); ++i) {
    if (w(i) < -1e-10L * top && w(i) < -zero) {
      throw NotPSD("eigenvalue " + std::to_string(static_cast<double>(w(i))) +
                   " is below -1e-10 * lambda_max");
    }
    roots(i) = w(i) > zero ? std::sqrt(w(i)) : 0.0L;
  }
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

XMatrix x_compute_K(const SymMatrix& h, const SymMatrix& g, double rho) {
  const XMatrix a = widen(g.matrix()) / static_cast<long double>(rho) + widen(h.matrix());
  if (auto k = x_spd_inverse(a)) return *k;
  // not numerically PD even in extended precision: jittered double path
  return widen(spd_inverse(SymMatrix::symmetrize(g.matrix() / rho + h.matrix())).matrix());
}

double require_optimum(const IterateTrace& trace) {
  if (!trace.f_star) throw MissingOptimum("certification needs the optimal value f*");
  return *trace.f_star;
}

}  // namespace

SymMatrix compute_K(const SymMatrix& h, const SymMatrix& g, double rho) {
  require_inputs(h, g, rho);
  return narrow(x_compute_K(h, g, rho));
}

SymMatrix compute_Lmat(const SymMatrix& h, const SymMatrix& g, double rho) {
  require_inputs(h, g, rho);
  const XMatrix h_half = x_psd_sqrt(widen(h.matrix()));
  const auto g_inv = x_spd_inverse(widen(g.matrix()));
  if (!g_inv) throw NotPositiveDefinite("G must be positive definite");
  XMatrix shifted = h_half * *g_inv * h_half;
  shifted.diagonal().array() += 1.0L / static_cast<long double>(rho);
  const auto inner = x_spd_inverse(0.5L * (shifted + shifted.transpose()));
  if (!inner) throw NotPositiveDefinite("(1/rho) I + H^{1/2} G^{-1} H^{1/2} is not positive definite");
  return narrow(h_half * *inner * h_half);
}

double compute_xi(const SymMatrix& h, const SymMatrix& g, double rho, double rank_tol) {
  require_inputs(h, g, rho);
  const SymMatrix whitened = congruence(spd_inv_sqrt(g), h);
  const double lambda = lambda_min_pos(whitened, rank_tol);
  if (!(lambda > 0.0)) throw ZeroHessian("xi is undefined for a zero Hessian");
  return xi_map(lambda, rho);
}

double compute_xi_from_K(const SymMatrix& h, const SymMatrix& g, double rho, double rank_tol) {
  const SymMatrix k = compute_K(h, g, rho);
  const double lambda = lambda_min_pos(congruence(psd_sqrt(h), k), rank_tol);
  if (!(lambda > 0.0)) throw ZeroHessian("xi is undefined for a zero Hessian");
  return lambda;
}

double compute_beta(const SymMatrix& h, const SymMatrix& g, double rho) {
  const SymMatrix k = compute_K(h, g, rho);
  const auto eig = sym_eig(congruence(psd_sqrt(k), g));
  return eig.eigenvalues(0);
}

Matrix momentum_matrix(const SymMatrix& h, const SymMatrix& g, double rho) {
  return compute_K(h, g, rho).matrix() * g.matrix() / rho;
}

SpectralDiagnostics spectral_snapshot(const Objective& model, const Vector& x,
                                      const SymMatrix& g, double rho) {
  const SymMatrix h = model.hessian(x);
  SpectralDiagnostics d;
  d.K = compute_K(h, g, rho);
  d.Lmat = compute_Lmat(h, g, rho);
  d.xi = compute_xi(h, g, rho);
  d.beta = compute_beta(h, g, rho);
  d.theta = momentum_matrix(h, g, rho);
  d.rho = rho;
  d.at_x = x;
  return d;
}

InverseIdentityCheck verify_inverse_identities(const SymMatrix& h, const SymMatrix& g,
                                               const SymMatrix& k, const SymMatrix& lmat,
                                               double rho, double tol) {
  require_inputs(h, g, rho);
  const Index n = h.order();
  const Matrix& G = g.matrix();
  const Matrix& K = k.matrix();

  InverseIdentityCheck out;
  out.residual_hk = (h.matrix() * K - (Matrix::Identity(n, n) - G * K / rho)).norm();
  out.residual_gkg = (G * K * G - rho * G + rho * lmat.matrix()).norm();
  out.gkg_scale = 1.0 + G.squaredNorm();
  out.ok = out.residual_hk <= tol && out.residual_gkg <= tol * out.gkg_scale;
  return out;
}

InverseIdentityCheck verify_inverse_identities(const SymMatrix& h, const SymMatrix& g, double rho,
                                               double tol) {
  return verify_inverse_identities(h, g, compute_K(h, g, rho), compute_Lmat(h, g, rho), rho, tol);
}

SpectralEquivalenceCheck verify_spectral_equivalence(const SymMatrix& h, const SymMatrix& g,
                                                     double rho, double tol, double rank_tol) {
  SpectralEquivalenceCheck out;
  out.from_K = nonzero_eigenvalues(congruence(psd_sqrt(h), compute_K(h, g, rho)), rank_tol);
  out.from_Lmat =
      nonzero_eigenvalues(congruence(spd_inv_sqrt(g), compute_Lmat(h, g, rho)), rank_tol);
  if (out.from_K.size() != out.from_Lmat.size()) {
    out.max_diff = std::numeric_limits<double>::infinity();
    out.ok = false;
    return out;
  }
  out.max_diff = out.from_K.size() ? (out.from_K - out.from_Lmat).cwiseAbs().maxCoeff() : 0.0;
  out.ok = out.max_diff <= tol;
  return out;
}

InequalityCheck verify_gradient_bound(const Objective& model, const Vector& x,
                                      const SymMatrix& g, double rho, double tol) {
  const Vector grad = model.gradient(x);
  const SymMatrix h = model.hessian(x);
  InequalityCheck out;
  out.lhs = weighted_norm_sq(grad, compute_K(h, g, rho));
  if (grad.squaredNorm() == 0.0) {
    out.rhs = 0.0;
  } else {
    out.rhs = compute_xi(h, g, rho) * grad.dot(pinv_apply(h, grad));
  }
  out.slack = out.lhs - out.rhs;
  out.holds = out.slack >= -tol;
  return out;
}

InequalityCheck verify_step_bound(const Vector& x, const Vector& x_prev, const SymMatrix& h,
                                  const SymMatrix& g, double rho, double tol) {
  require_inputs(h, g, rho);
  const Vector d = x - x_prev;
  InequalityCheck out;
  out.precondition_met = positive_definite(h) || in_hessian_range(h, g.matrix() * d);
  if (d.squaredNorm() == 0.0) {
    out.holds = true;
    return out;
  }
  out.lhs = weighted_norm_sq(d, compute_Lmat(h, g, rho));
  out.rhs = compute_xi(h, g, rho) * weighted_norm_sq(d, g);
  out.slack = out.lhs - out.rhs;
  out.holds = out.slack >= -tol;
  return out;
}

double lyapunov(double f_x, double f_star, const Vector& x, const Vector& x_prev,
                const SymMatrix& g, double rho, double step_L) {
  if (f_star > f_x + 1e-9) {
    throw InvalidArgument("f* = " + std::to_string(f_star) + " exceeds f(x) = " +
                          std::to_string(f_x));
  }
  if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
  return f_x - f_star + step_L / (2.0 * rho) * weighted_norm_sq(x - x_prev, g);
}

bool ContractionReport::certified() const {
  return std::all_of(steps.begin(), steps.end(),
                     [](const ContractionStep& s) { return s.satisfied || s.vacuous; });
}

bool ContractionReport::non_vacuous() const {
  return std::all_of(steps.begin(), steps.end(),
                     [](const ContractionStep& s) { return s.satisfied && !s.vacuous; });
}

ContractionReport certify_pnm_contraction(const IterateTrace& trace, const Objective& model,
                                          const PreconditionerPolicy& policy, double mu,
                                          double step_L) {
  const double f_star = require_optimum(trace);
  if (trace.method != Method::pnm) throw InvalidArgument("contraction certificate needs a pnm trace");

  ContractionReport report;
  report.kind = ContractionReport::Kind::penalty;
  report.mu = mu;
  report.step_L = step_L;

  for (std::size_t i = 0; i + 1 < trace.records.size(); ++i) {
    const auto& cur = trace.records[i];
    const auto& next = trace.records[i + 1];
    const SymMatrix h = model.hessian(cur.x);
    const SymMatrix g = policy.realize(h);

    ContractionStep s;
    s.k = cur.k;
    s.xi = compute_xi(h, g, cur.rho);
    s.beta = compute_beta(h, g, cur.rho);
    s.eta = mu * s.xi * (s.beta + cur.rho) / (cur.rho * step_L);
    s.bound = 1.0 - s.eta;
    s.vacuous = !(s.eta > 0.0 && s.eta <= 1.0);

    const double gap = gap_of(cur, f_star);
    const double gap_next = gap_of(next, f_star);
    s.lhs = gap > 0.0 ? gap_next / gap : 0.0;
    s.slack = s.bound * gap + kCertSlack - gap_next;
    s.satisfied = s.slack >= 0.0;
    report.steps.push_back(s);
  }
  summarize(report);
  return report;
}

ContractionReport certify_anm_lyapunov(const IterateTrace& trace, const Objective& model,
                                       const PreconditionerPolicy& policy, double mu,
                                       double step_L) {
  const double f_star = require_optimum(trace);
  if (trace.method != Method::anm) throw InvalidArgument("Lyapunov certificate needs an anm trace");

  ContractionReport report;
  report.kind = ContractionReport::Kind::augmented;
  report.mu = mu;
  report.step_L = step_L;

  const auto& recs = trace.records;
  std::vector<double> series;  // V_k(rho_k) with G_k, k >= 1
  for (std::size_t i = 1; i < recs.size(); ++i) {
    const auto& cur = recs[i];
    const auto& prev = recs[i - 1];
    const SymMatrix h = model.hessian(cur.x);
    const SymMatrix g = policy.realize(h);
    const double v_cur = cur.f - f_star +
                         step_L / (2.0 * cur.rho) * weighted_norm_sq(cur.x - prev.x, g);
    series.push_back(v_cur);
    if (i + 1 == recs.size()) break;

    const auto& next = recs[i + 1];
    const double v_next = next.f - f_star +
                          step_L / (2.0 * cur.rho) * weighted_norm_sq(next.x - cur.x, g);

    ContractionStep s;
    s.k = cur.k;
    s.xi = compute_xi(h, g, cur.rho);
    s.eta = s.xi * mu / step_L;
    s.bound = 1.0 - s.eta;
    s.vacuous = !(s.eta > 0.0 && s.eta <= 1.0);
    s.lhs = v_cur > 0.0 ? v_next / v_cur : 0.0;
    s.slack = s.bound * v_cur + kCertSlack - v_next;
    s.satisfied = s.slack >= 0.0;
    s.assumption_ok = positive_definite(h) || in_hessian_range(h, g.matrix() * (cur.x - prev.x));
    report.steps.push_back(s);
  }
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i] > series[i - 1] + kCertSlack) report.lyapunov_nonincreasing = false;
  }
  summarize(report);
  return report;
}

}  // namespace pnewton
