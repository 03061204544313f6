#include "pnewton/root_finding.hpp"

#include <cmath>
#include <string>

#include "pnewton/errors.hpp"

namespace pnewton {

namespace {

constexpr double kMinDenominator = 1e-14;

void validate(double rho, double tol, int max_iters) {
  if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
}

double denominator(const ScalarFn& fprime, double x, double rho, int k) {
  const double d = 1.0 + rho * fprime(x);
  if (!(std::abs(d) > kMinDenominator)) {
    throw DenominatorVanished("1 + rho f'(x) vanished at iterate " + std::to_string(k) +
                              " (x = " + std::to_string(x) + ")");
  }
  return d;
}

}  // namespace

RootResult root_penalty_newton(const ScalarFn& f, const ScalarFn& fprime, double x0, double rho,
                               double tol, int max_iters) {
  validate(rho, tol, max_iters);
  RootResult out;
  double x = x0;
  out.trace.push_back(x);
  for (int k = 0;; ++k) {
    const double fx = f(x);
    if (std::abs(fx) <= tol) {
      out.root = x;
      out.iterations = k;
      return out;
    }
    if (k == max_iters) break;
    x -= rho * fx / denominator(fprime, x, rho, k);
    out.trace.push_back(x);
  }
  throw MaxIters("penalty Newton root finding did not reach |f| <= tol in " +
                 std::to_string(max_iters) + " iterations");
}

RootResult root_augmented_newton(const ScalarFn& f, const ScalarFn& fprime, double x0, double x1,
                                 double rho, double tol, int max_iters) {
  validate(rho, tol, max_iters);
  RootResult out;
  out.trace = {x0, x1};
  double prev = x0;
  double x = x1;
  for (int k = 0;; ++k) {
    const double fx = f(x);
    if (std::abs(fx) <= tol) {
      out.root = x;
      out.iterations = k;
      return out;
    }
    if (k == max_iters) break;
    const double next = x - (rho * fx - (x - prev)) / denominator(fprime, x, rho, k);
    prev = x;
    x = next;
    out.trace.push_back(x);
  }
  throw MaxIters("augmented Newton root finding did not reach |f| <= tol in " +
                 std::to_string(max_iters) + " iterations");
}

}  // namespace pnewton
