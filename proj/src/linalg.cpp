#include "pnewton/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace pnewton {

namespace {

constexpr int kJitterRetries = 3;
constexpr double kNegativeEigTol = 1e-10;

void require_square(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw BadShape("matrix must be square, got " + std::to_string(m.rows()) + "x" +
                   std::to_string(m.cols()));
  }
}

void require_finite(const Matrix& m) {
  if (!m.allFinite()) throw InvalidArgument("matrix has non-finite entries");
}

void require_length(const SymMatrix& m, const Vector& b) {
  if (b.size() != m.order()) {
    throw BadShape("vector length " + std::to_string(b.size()) + " does not match order " +
                   std::to_string(m.order()));
  }
}

Eigen::LLT<Matrix> jittered_cholesky(const SymMatrix& m) {
  Eigen::LLT<Matrix> llt(m.matrix());
  if (llt.info() == Eigen::Success) return llt;

  const Index n = m.order();
  const double trace = m.matrix().trace();
  double jitter = 1e-12 * (trace > 0.0 ? trace / static_cast<double>(n) : 1.0);
  for (int retry = 0; retry < kJitterRetries; ++retry, jitter *= 10.0) {
    Matrix shifted = m.matrix();
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NotPositiveDefinite("Cholesky factorization failed after " +
                            std::to_string(kJitterRetries) + " jitter retries");
}

// Eigenvalues that are zero up to eigensolver round-off.
double numeric_zero(const Vector& eigenvalues) {
  const double scale = eigenvalues.cwiseAbs().maxCoeff();
  return static_cast<double>(eigenvalues.size()) * std::numeric_limits<double>::epsilon() * scale;
}

}  // namespace

SymMatrix::SymMatrix(Matrix m) {
  require_square(m);
  require_finite(m);
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = m.size() ? (m - m.transpose()).cwiseAbs().maxCoeff() : 0.0;
  if (asym > 1e-12 * scale) {
    throw InvalidArgument("matrix is not symmetric (max asymmetry " + std::to_string(asym) + ")");
  }
  m_ = std::move(m);
}

SymMatrix SymMatrix::symmetrize(const Matrix& m) {
  require_square(m);
  require_finite(m);
  return SymMatrix(Matrix(0.5 * (m + m.transpose())), Trusted{});
}

SymMatrix SymMatrix::identity(Index n) { return SymMatrix(Matrix::Identity(n, n), Trusted{}); }

SymMatrix SymMatrix::diagonal(const Vector& d) {
  if (!d.allFinite()) throw InvalidArgument("diagonal has non-finite entries");
  return SymMatrix(Matrix(d.asDiagonal()), Trusted{});
}

SymMatrix SymMatrix::zero(Index n) { return SymMatrix(Matrix::Zero(n, n), Trusted{}); }

Vector spd_solve(const SymMatrix& m, const Vector& b) {
  require_length(m, b);
  return jittered_cholesky(m).solve(b);
}

SymMatrix spd_inverse(const SymMatrix& m) {
  const Index n = m.order();
  return SymMatrix::symmetrize(jittered_cholesky(m).solve(Matrix::Identity(n, n)));
}

EigenDecomposition sym_eig(const SymMatrix& m) {
  if (m.order() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix());
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("symmetric eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Vector pinv_apply(const SymMatrix& m, const Vector& b, double rank_tol) {
  require_length(m, b);
  if (m.order() == 0) return b;
  const auto eig = sym_eig(m);
  const double lmax = eig.eigenvalues.maxCoeff();
  if (lmax <= 0.0) return Vector::Zero(b.size());

  const double cutoff = rank_tol * lmax;
  Vector coeffs = eig.eigenvectors.transpose() * b;
  for (Index i = 0; i < coeffs.size(); ++i) {
    const double lambda = eig.eigenvalues(i);
    coeffs(i) = lambda > cutoff ? coeffs(i) / lambda : 0.0;
  }
  return eig.eigenvectors * coeffs;
}

SymMatrix psd_sqrt(const SymMatrix& m) {
  if (m.order() == 0) return m;
  const auto eig = sym_eig(m);
  const double lmax = eig.eigenvalues.maxCoeff();
  const double zero = numeric_zero(eig.eigenvalues);

  Vector roots(eig.eigenvalues.size());
  for (Index i = 0; i < roots.size(); ++i) {
    const double lambda = eig.eigenvalues(i);
    if (lambda < -kNegativeEigTol * std::max(lmax, 0.0) && lambda < -zero) {
      throw NotPSD("eigenvalue " + std::to_string(lambda) + " is below -1e-10 * lambda_max");
    }
    roots(i) = lambda > zero ? std::sqrt(lambda) : 0.0;
  }
  return SymMatrix::symmetrize(eig.eigenvectors * roots.asDiagonal() *
                               eig.eigenvectors.transpose());
}

SymMatrix spd_inv_sqrt(const SymMatrix& m) {
  if (m.order() == 0) return m;
  const auto eig = sym_eig(m);
  if (eig.eigenvalues.minCoeff() <= 0.0) {
    throw NotPositiveDefinite("inverse square root needs a positive definite matrix");
  }
  const Vector scale = eig.eigenvalues.array().rsqrt();
  return SymMatrix::symmetrize(eig.eigenvectors * scale.asDiagonal() *
                               eig.eigenvectors.transpose());
}

double weighted_norm_sq(const Vector& x, const SymMatrix& m) {
  if (x.size() != m.order()) throw BadShape("vector length does not match matrix order");
  const double value = x.dot(m.matrix() * x);
  if (value < 0.0) {
    const double floor = -1e-12 * m.matrix().norm() * x.squaredNorm();
    if (value >= floor) return 0.0;
  }
  return value;
}

Vector nonzero_eigenvalues(const SymMatrix& m, double rank_tol) {
  if (m.order() == 0) return {};
  const auto eig = sym_eig(m);
  const double lmax = eig.eigenvalues.maxCoeff();
  if (lmax <= 0.0) return {};
  const double cutoff = rank_tol * lmax;

  std::vector<double> kept;
  for (Index i = 0; i < eig.eigenvalues.size(); ++i) {
    if (eig.eigenvalues(i) > cutoff) kept.push_back(eig.eigenvalues(i));
  }
  return Eigen::Map<const Vector>(kept.data(), static_cast<Index>(kept.size()));
}

double lambda_min_pos(const SymMatrix& m, double rank_tol) {
  const Vector nz = nonzero_eigenvalues(m, rank_tol);
  return nz.size() ? nz(0) : 0.0;
}

}  // namespace pnewton
