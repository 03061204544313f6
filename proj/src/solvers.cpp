#include "pnewton/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace pnewton {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kRangeTol = 1e-8;
constexpr double kMinStep = 1e-16;

std::int64_t nanos_since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

void require_dimension(const Objective& model, const Vector& x, const char* what) {
  if (x.size() != model.dimension()) {
    throw BadShape(std::string(what) + " has length " + std::to_string(x.size()) +
                   ", expected " + std::to_string(model.dimension()));
  }
}

void require_rho(double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidArgument("rho must be positive");
}

SymMatrix shifted(const SymMatrix& h, const SymMatrix& g, double rho) {
  if (g.order() != h.order()) throw BadShape("preconditioner order does not match Hessian");
  return SymMatrix::symmetrize(g.matrix() / rho + h.matrix());
}

// H^+ g with the range check shared by the Newton variants.
Vector newton_direction(const SymMatrix& h, const Vector& g) {
  const Vector d = pinv_apply(h, g);
  const double residual = (h.matrix() * d - g).norm();
  if (residual > kRangeTol * (1.0 + g.norm())) {
    throw RangeViolation("gradient is not in the range of the Hessian (residual " +
                         std::to_string(residual) + ")");
  }
  return d;
}

// Evaluation of the quantities recorded for an iterate.
struct Snapshot {
  double f;
  Vector grad;
  SymMatrix hess;
};

Snapshot evaluate(const Objective& model, const Vector& x) {
  return {model.value(x), model.gradient(x), model.hessian(x)};
}

IterateRecord make_record(int k, const Vector& x, const Snapshot& s, double rho,
                          double step_norm_sq, Clock::time_point start) {
  IterateRecord r;
  r.k = k;
  r.x = x;
  r.f = s.f;
  r.grad_norm = s.grad.norm();
  r.rho = rho;
  r.step_norm_G_sq = step_norm_sq;
  r.elapsed_ns = nanos_since(start);
  return r;
}

double lyapunov_value(double f, double f_star, double step_norm_sq, double step_L, double rho) {
  return f - f_star + step_L / (2.0 * rho) * step_norm_sq;
}

IterateTrace start_trace(Method method, const SolverConfig& config,
                         std::optional<double> f_star) {
  config.validate();
  IterateTrace trace;
  trace.method = method;
  trace.step_L = config.step_L;
  trace.f_star = f_star;
  return trace;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

IterateTrace damped_newton_impl(const Objective& model, const Vector& x0,
                                const SolverConfig& config, std::optional<double> f_star,
                                bool stop_on_stall) {
  require_dimension(model, x0, "x0");
  IterateTrace trace = start_trace(Method::damped_newton, config, f_star);
  const auto start = Clock::now();
  const auto& bt = config.backtracking;

  Vector x = x0;
  Vector x_prev = x0;
  for (int k = 0;; ++k) {
    const Snapshot s = evaluate(model, x);
    trace.records.push_back(make_record(k, x, s, kInf, (x - x_prev).squaredNorm(), start));
    if (trace.back().grad_norm <= config.grad_tol) {
      trace.termination = Termination::converged;
      break;
    }
    if (k == config.max_iters) {
      trace.termination = Termination::max_iters;
      break;
    }

    const Vector d = newton_direction(s.hess, s.grad);
    const double decrement_sq = std::max(s.grad.dot(d), 0.0);
    // Once the predicted decrease drops below the resolution of f, rounding
    // noise in f would otherwise reject every step.
    const double resolution = 16.0 * std::numeric_limits<double>::epsilon() *
                              std::max(1.0, std::abs(s.f));
    const double roundoff = bt.alpha * decrement_sq <= resolution ? resolution : 0.0;
    double t = 1.0;
    Vector candidate = x - d;
    while (model.value(candidate) > s.f - bt.alpha * t * decrement_sq + roundoff) {
      t *= bt.beta;
      const bool unresolvable = roundoff == 0.0 && bt.alpha * t * decrement_sq <= resolution;
      if (t < kMinStep || unresolvable) {
        if (stop_on_stall) {
          trace.termination = Termination::max_iters;
          return trace;
        }
        throw LineSearchStall("backtracking stalled at iteration " + std::to_string(k) +
                              " (t = " + std::to_string(t) + ")");
      }
      candidate = x - t * d;
    }
    x_prev = x;
    x = candidate;
  }
  return trace;
}

}  // namespace

// ---- configuration ----

PreconditionerPolicy PreconditionerPolicy::fixed(SymMatrix g) {
  const auto eig = sym_eig(g);
  if (eig.eigenvalues.size() == 0 || eig.eigenvalues(0) <= 0.0) {
    throw NotPositiveDefinite("fixed preconditioner must be positive definite");
  }
  PreconditionerPolicy p(Kind::fixed);
  p.fixed_ = std::move(g);
  return p;
}

SymMatrix PreconditionerPolicy::realize(const SymMatrix& h) const {
  switch (kind_) {
    case Kind::identity:
      return SymMatrix::identity(h.order());
    case Kind::hessian_diagonal: {
      const Vector d = h.matrix().diagonal();
      if (d.size() && d.minCoeff() <= 0.0) {
        throw NotPositiveDefinite("Hessian diagonal has a non-positive entry");
      }
      return SymMatrix::diagonal(d);
    }
    case Kind::fixed:
      if (fixed_->order() != h.order()) throw BadShape("fixed preconditioner has wrong order");
      return *fixed_;
  }
  return SymMatrix::identity(h.order());
}

std::string_view to_string(PreconditionerPolicy::Kind kind) {
  switch (kind) {
    case PreconditionerPolicy::Kind::identity: return "identity";
    case PreconditionerPolicy::Kind::hessian_diagonal: return "diag";
    case PreconditionerPolicy::Kind::fixed: return "fixed";
  }
  return "unknown";
}

double PenaltySchedule::at(int k) const {
  const double grown = rho0 * std::pow(c, static_cast<double>(k));
  return std::isfinite(grown) ? std::min(grown, rho_max) : rho_max;
}

void PenaltySchedule::validate() const {
  if (!(rho0 > 0.0) || !std::isfinite(rho0)) throw InvalidArgument("rho0 must be positive");
  if (!(c >= 1.0) || !std::isfinite(c)) throw InvalidArgument("schedule factor c must be >= 1");
  if (!(rho_max >= rho0)) throw InvalidArgument("rho_max must be >= rho0");
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::newton: return "newton";
    case Method::damped_newton: return "damped_newton";
    case Method::pnm: return "pnm";
    case Method::anm: return "anm";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "newton") return Method::newton;
  if (name == "damped_newton") return Method::damped_newton;
  if (name == "pnm") return Method::pnm;
  if (name == "anm") return Method::anm;
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

void SolverConfig::validate() const {
  schedule.validate();
  if (!(step_L > 0.0) || !std::isfinite(step_L)) throw InvalidArgument("step_L must be positive");
  if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
  if (!(grad_tol > 0.0)) throw InvalidArgument("grad_tol must be positive");
  if (!(backtracking.alpha > 0.0 && backtracking.alpha <= 0.5)) {
    throw InvalidArgument("backtracking alpha must lie in (0, 1/2]");
  }
  if (!(backtracking.beta > 0.0 && backtracking.beta < 1.0)) {
    throw InvalidArgument("backtracking beta must lie in (0, 1)");
  }
}

std::string_view to_string(Termination t) {
  return t == Termination::converged ? "converged" : "max_iters";
}

int IterateTrace::iterations() const {
  const int initial = method == Method::anm ? 2 : 1;
  return std::max(0, static_cast<int>(records.size()) - initial);
}

// ---- steps ----

Vector newton_step(const Objective& model, const Vector& x, double step_L) {
  require_dimension(model, x, "x");
  const Vector d = newton_direction(model.hessian(x), model.gradient(x));
  return x - d / step_L;
}

Vector pnm_step(const Objective& model, const Vector& x, double rho, const SymMatrix& g,
                double step_L) {
  require_dimension(model, x, "x");
  require_rho(rho);
  const Vector grad = model.gradient(x);
  return x - spd_solve(shifted(model.hessian(x), g, rho), grad) / step_L;
}

DualStep anm_step_dual(const Objective& model, const Vector& x, const DualState& dual,
                       double rho, const SymMatrix& g, double step_L) {
  require_dimension(model, x, "x");
  require_dimension(model, dual.z, "multiplier");
  require_rho(rho);
  DualStep out;
  out.dual_next.u = (rho / step_L) * model.gradient(x) + g.matrix() * dual.z;
  out.dual_next.z = spd_solve(shifted(model.hessian(x), g, rho), out.dual_next.u) / rho;
  out.x_next = x - out.dual_next.z;
  return out;
}

Vector anm_step_momentum(const Objective& model, const Vector& x, const Vector& x_prev,
                         double rho, const SymMatrix& g, double step_L) {
  require_dimension(model, x, "x");
  require_dimension(model, x_prev, "x_prev");
  require_rho(rho);
  const Vector rhs = model.gradient(x) / step_L - g.matrix() * (x - x_prev) / rho;
  return x - spd_solve(shifted(model.hessian(x), g, rho), rhs);
}

// ---- runs ----

IterateTrace newton_run(const Objective& model, const Vector& x0, const SolverConfig& config,
                        std::optional<double> f_star) {
  require_dimension(model, x0, "x0");
  IterateTrace trace = start_trace(Method::newton, config, f_star);
  const auto start = Clock::now();

  Vector x = x0;
  Vector x_prev = x0;
  for (int k = 0;; ++k) {
    const Snapshot s = evaluate(model, x);
    trace.records.push_back(make_record(k, x, s, kInf, (x - x_prev).squaredNorm(), start));
    if (trace.back().grad_norm <= config.grad_tol) {
      trace.termination = Termination::converged;
      break;
    }
    if (k == config.max_iters) {
      trace.termination = Termination::max_iters;
      break;
    }
    x_prev = x;
    x = x - newton_direction(s.hess, s.grad) / config.step_L;
  }
  return trace;
}

IterateTrace damped_newton_run(const Objective& model, const Vector& x0,
                               const SolverConfig& config, std::optional<double> f_star) {
  return damped_newton_impl(model, x0, config, f_star, false);
}

IterateTrace pnm_run(const Objective& model, const Vector& x0, const SolverConfig& config,
                     std::optional<double> f_star) {
  require_dimension(model, x0, "x0");
  IterateTrace trace = start_trace(Method::pnm, config, f_star);
  const auto start = Clock::now();

  Vector x = x0;
  Vector x_prev = x0;
  for (int k = 0;; ++k) {
    const Snapshot s = evaluate(model, x);
    const SymMatrix g = config.precond.realize(s.hess);
    const double rho = config.schedule.at(k);
    trace.records.push_back(
        make_record(k, x, s, rho, weighted_norm_sq(x - x_prev, g), start));
    if (trace.back().grad_norm <= config.grad_tol) {
      trace.termination = Termination::converged;
      break;
    }
    if (k == config.max_iters) {
      trace.termination = Termination::max_iters;
      break;
    }
    x_prev = x;
    x = x - spd_solve(shifted(s.hess, g, rho), s.grad) / config.step_L;
  }
  return trace;
}

namespace {

// Shared driver for both ANM forms. `advance` maps (record index k, x_k,
// x_{k-1}, snapshot, G_k, rho) to x_{k+1}.
template <class Advance>
IterateTrace anm_drive(const Objective& model, const Vector& x0, const Vector& x1,
                       const SolverConfig& config, std::optional<double> f_star,
                       Advance&& advance) {
  require_dimension(model, x0, "x0");
  require_dimension(model, x1, "x1");
  IterateTrace trace = start_trace(Method::anm, config, f_star);
  const auto start = Clock::now();

  {
    const Snapshot s0 = evaluate(model, x0);
    trace.records.push_back(make_record(0, x0, s0, config.schedule.at(0), 0.0, start));
  }

  Vector x = x1;
  Vector x_prev = x0;
  for (int k = 1;; ++k) {
    const Snapshot s = evaluate(model, x);
    const SymMatrix g = config.precond.realize(s.hess);
    const double rho = config.schedule.at(k - 1);
    const double step_sq = weighted_norm_sq(x - x_prev, g);
    IterateRecord rec = make_record(k, x, s, rho, step_sq, start);
    if (f_star) rec.lyapunov = lyapunov_value(s.f, *f_star, step_sq, config.step_L, rho);
    trace.records.push_back(std::move(rec));

    if (trace.back().grad_norm <= config.grad_tol && std::sqrt(step_sq) <= config.grad_tol) {
      trace.termination = Termination::converged;
      break;
    }
    if (k - 1 == config.max_iters) {
      trace.termination = Termination::max_iters;
      break;
    }
    Vector next = advance(k, x, x_prev, s, g, rho);
    x_prev = std::move(x);
    x = std::move(next);
  }
  return trace;
}

}  // namespace

IterateTrace anm_run(const Objective& model, const Vector& x0, const Vector& x1,
                     const SolverConfig& config, std::optional<double> f_star) {
  return anm_drive(model, x0, x1, config, f_star,
                   [&](int, const Vector& x, const Vector& x_prev, const Snapshot& s,
                       const SymMatrix& g, double rho) -> Vector {
                     const Vector rhs = s.grad / config.step_L - g.matrix() * (x - x_prev) / rho;
                     return x - spd_solve(shifted(s.hess, g, rho), rhs);
                   });
}

DualTrace anm_run_dual(const Objective& model, const Vector& x0, const Vector& x1,
                       const SolverConfig& config, std::optional<double> f_star) {
  DualTrace out;
  out.multipliers.push_back(Vector::Zero(x0.size()));
  out.multipliers.push_back(x0 - x1);
  out.trace = anm_drive(model, x0, x1, config, f_star,
                        [&](int k, const Vector& x, const Vector&, const Snapshot& s,
                            const SymMatrix& g, double rho) -> Vector {
                          const Vector& z = out.multipliers[static_cast<std::size_t>(k)];
                          const Vector u = (rho / config.step_L) * s.grad + g.matrix() * z;
                          Vector z_next = spd_solve(shifted(s.hess, g, rho), u) / rho;
                          Vector x_next = x - z_next;
                          out.multipliers.push_back(std::move(z_next));
                          return x_next;
                        });
  out.multipliers.resize(out.trace.records.size());
  return out;
}

IterateTrace solve(const Objective& model, const Vector& x0, const SolverConfig& config,
                   std::optional<double> f_star) {
  switch (config.method) {
    case Method::newton: return newton_run(model, x0, config, f_star);
    case Method::damped_newton: return damped_newton_run(model, x0, config, f_star);
    case Method::pnm: return pnm_run(model, x0, config, f_star);
    case Method::anm: return anm_run(model, x0, x0, config, f_star);
  }
  throw InvalidArgument("unknown method");
}

OptimumEstimate optimum_oracle(const Objective& model, const Vector& x0, double grad_tol,
                               int max_iters) {
  SolverConfig config;
  config.method = Method::damped_newton;
  config.grad_tol = grad_tol;
  config.max_iters = max_iters;
  const IterateTrace trace = damped_newton_impl(model, x0, config, std::nullopt, true);
  const auto& last = trace.back();
  return {last.x, last.f, last.grad_norm, trace.iterations()};
}

}  // namespace pnewton
