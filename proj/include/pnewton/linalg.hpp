#pragma once

#include <Eigen/Dense>

#include "pnewton/errors.hpp"

namespace pnewton {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kDefaultRankTol = 1e-10;

/// Dense symmetric matrix. Symmetry and finiteness are checked on
/// construction; the stored entries are never modified afterwards.
class SymMatrix {
 public:
  SymMatrix() = default;

  /// Throws BadShape if `m` is not square, InvalidArgument if it holds
  /// non-finite entries or max|m_ij - m_ji| > 1e-12 * max|m|.
  explicit SymMatrix(Matrix m);

  /// Builds (m + m^T)/2. Use for results of floating-point products that
  /// are symmetric only up to rounding.
  static SymMatrix symmetrize(const Matrix& m);
  static SymMatrix identity(Index n);
  static SymMatrix diagonal(const Vector& d);
  static SymMatrix zero(Index n);

  Index order() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

 private:
  struct Trusted {};
  SymMatrix(Matrix m, Trusted) : m_(std::move(m)) {}

  Matrix m_;
};

struct EigenDecomposition {
  Vector eigenvalues;  // ascending
  Matrix eigenvectors; // orthonormal columns
};

/// Solves M x = b for symmetric positive definite M via Cholesky. When the
/// factorization fails a diagonal jitter of 1e-12 * trace(M)/n is added and
/// escalated x10 for up to three retries; NotPositiveDefinite after that.
Vector spd_solve(const SymMatrix& m, const Vector& b);

/// Inverse of an SPD matrix through the same jittered Cholesky.
SymMatrix spd_inverse(const SymMatrix& m);

EigenDecomposition sym_eig(const SymMatrix& m);

/// M^+ b with eigenvalues <= rank_tol * lambda_max treated as zero.
Vector pinv_apply(const SymMatrix& m, const Vector& b, double rank_tol = kDefaultRankTol);

/// Principal square root of a PSD matrix. Eigenvalues in
/// [-1e-10 lambda_max, 0) are clamped to zero; anything more negative is NotPSD.
SymMatrix psd_sqrt(const SymMatrix& m);

/// M^{-1/2} for positive definite M.
SymMatrix spd_inv_sqrt(const SymMatrix& m);

/// x^T M x, with tiny negative round-off clamped to zero.
double weighted_norm_sq(const Vector& x, const SymMatrix& m);

/// Smallest eigenvalue exceeding rank_tol * lambda_max; 0 when M is ~0.
double lambda_min_pos(const SymMatrix& m, double rank_tol = kDefaultRankTol);

/// All eigenvalues exceeding rank_tol * lambda_max, ascending.
Vector nonzero_eigenvalues(const SymMatrix& m, double rank_tol = kDefaultRankTol);

}  // namespace pnewton
