#pragma once

#include <functional>
#include <vector>

namespace pnewton {

using ScalarFn = std::function<double(double)>;

struct RootResult {
  double root = 0.0;
  int iterations = 0;
  std::vector<double> trace;  // every iterate, starting with the initial point(s)
};

/// Scalar penalty Newton: x <- x - rho f(x) / (1 + rho f'(x)).
/// Stops when |f(x_k)| <= tol. Throws DenominatorVanished when
/// |1 + rho f'(x_k)| <= 1e-14 and MaxIters when the budget runs out.
RootResult root_penalty_newton(const ScalarFn& f, const ScalarFn& fprime, double x0, double rho,
                               double tol, int max_iters);

/// Scalar augmented Newton:
/// x_{k+1} = x_k - (rho f(x_k) - (x_k - x_{k-1})) / (1 + rho f'(x_k)).
/// With x0 == x1 the first step coincides with the penalty variant.
RootResult root_augmented_newton(const ScalarFn& f, const ScalarFn& fprime, double x0, double x1,
                                 double rho, double tol, int max_iters);

}  // namespace pnewton
