#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "mannystrom/matrix_functions.hpp"
#include "mannystrom/nystrom.hpp"
#include "mannystrom/rng.hpp"
#include "mannystrom/sketching.hpp"

namespace mannystrom {
namespace optimizer {

/* ---------------------------------------------------------------------- */
/* Cubic subproblem                                                        */
/* ---------------------------------------------------------------------- */

/// Reduced model phi(c) = a'c + c'Qc/2 + (sigma/6)|c|^3 in the orthonormal
/// frame of the sketch subspace; q is the Nystrom core.
struct CubicModel {
  Matrix q;
  Vector a;
  double sigma = 1.0;
};

struct CubicSolution {
  Vector c;
  double nu = 0.0;
  double model_value = 0.0;  // phi(c); negative whenever a step exists
  bool hard_case = false;
};

namespace detail {

struct Secular {
  const Vector& lam;  // descending
  const Vector& g;    // gradient in the eigenbasis
  double sigma;

  double norm2(double nu) const {
    double s = 0.0;
    for (Index i = 0; i < lam.size(); ++i) {
      if (g(i) == 0.0) continue;
      double den = lam(i) + nu;
      if (den <= 0.0) return std::numeric_limits<double>::infinity();
      double t = g(i) / den;
      s += t * t;
    }
    return s;
  }

  // r(nu) = nu - (sigma/2) |c(nu)|, strictly increasing right of the pole
  double residual(double nu) const {
    double n2 = norm2(nu);
    if (!std::isfinite(n2)) return -std::numeric_limits<double>::infinity();
    return nu - 0.5 * sigma * std::sqrt(n2);
  }

  double slope(double nu, double cnorm) const {
    if (cnorm == 0.0) return 1.0;
    double s = 0.0;
    for (Index i = 0; i < lam.size(); ++i) {
      if (g(i) == 0.0) continue;
      double den = lam(i) + nu;
      double t = g(i) / den;
      s += t * t / den;
    }
    return 1.0 + 0.5 * sigma * s / cnorm;
  }
};

}  // namespace detail

/// Global minimizer of the cubic model via the secular equation
/// nu = (sigma/2)|c(nu)| on (max(0, -lambda_min), infinity), solved in the
/// eigenbasis of q with a safeguarded Newton iteration; the hard case adds
/// a bottom-eigenvector component to reach the required norm.
inline CubicSolution cubic_subproblem(const CubicModel& model) {
  const Index l = model.q.rows();
  if (l == 0 || model.q.cols() != l || model.a.size() != l)
    throw InvalidInput("cubic_subproblem: inconsistent model sizes");
  if (!(model.sigma > 0.0))
    throw InvalidInput("cubic_subproblem: sigma must be positive");

  auto eig = matfun::sym_eig(matfun::symmetrize(model.q));
  const Vector& lam = eig.eigenvalues;
  Vector g = eig.vectors.transpose() * model.a;

  const double lmin = lam(l - 1);
  const double nu0 = std::max(0.0, -lmin);
  const double anorm = model.a.norm();
  const double cluster_tol =
      1e-12 * std::max({1.0, std::abs(lam(0)), std::abs(lmin)});

  auto finish = [&](Vector y, double nu, bool hard) {
    CubicSolution sol;
    sol.c = eig.vectors * y;
    sol.nu = nu;
    sol.hard_case = hard;
    sol.model_value = model.a.dot(sol.c) + 0.5 * sol.c.dot(model.q * sol.c) +
                      model.sigma / 6.0 * std::pow(sol.c.norm(), 3);
    return sol;
  };

  // component of the gradient on the bottom eigenvalue cluster
  double gmin2 = 0.0;
  for (Index i = 0; i < l; ++i)
    if (lam(i) - lmin <= cluster_tol) gmin2 += g(i) * g(i);
  const bool aligned = std::sqrt(gmin2) > 1e-12 * (anorm + 1.0);

  if (anorm == 0.0 && nu0 == 0.0) return finish(Vector::Zero(l), 0.0, false);

  detail::Secular sec{lam, g, model.sigma};

  if (nu0 > 0.0 && !aligned) {
    // gradient is (numerically) orthogonal to the bottom eigenspace
    Vector y0 = Vector::Zero(l);
    double n2 = 0.0;
    for (Index i = 0; i < l; ++i) {
      if (lam(i) - lmin <= cluster_tol) continue;
      y0(i) = -g(i) / (lam(i) + nu0);
      n2 += y0(i) * y0(i);
    }
    double target = 2.0 * nu0 / model.sigma;
    if (target * target >= n2) {
      double tau = std::sqrt(target * target - n2);
      y0(l - 1) += tau;  // the bottom eigenvector carries the slack
      return finish(std::move(y0), nu0, true);
    }
    // interior root to the right of nu0; fall through to the secular solve
  }

  // bracket: residual is -inf (or <= 0) at nu0, grows without bound
  double lo = nu0;
  double hi = std::max(nu0 * 2.0, nu0 + 1.0);
  for (int guard = 0; sec.residual(hi) < 0.0 && guard < 200; ++guard)
    hi = 2.0 * hi + 1.0;

  double nu = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double n2 = sec.norm2(nu);
    double cnorm = std::isfinite(n2) ? std::sqrt(n2)
                                     : std::numeric_limits<double>::infinity();
    double r = std::isfinite(cnorm) ? nu - 0.5 * model.sigma * cnorm
                                    : -std::numeric_limits<double>::infinity();
    if (std::isfinite(r) && std::abs(r) <= 1e-14 * (1.0 + nu)) break;
    if (r > 0.0)
      hi = nu;
    else
      lo = nu;
    double next = hi;
    if (std::isfinite(r)) {
      double dr = sec.slope(nu, cnorm);
      next = nu - r / dr;
    }
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-16 * (1.0 + hi)) {
      nu = 0.5 * (lo + hi);
      break;
    }
    nu = next;
  }

  Vector y(l);
  for (Index i = 0; i < l; ++i) {
    double den = lam(i) + nu;
    y(i) = den > 0.0 ? -g(i) / den : 0.0;
  }
  return finish(std::move(y), nu, false);
}

/* ---------------------------------------------------------------------- */
/* ARC schedule                                                            */
/* ---------------------------------------------------------------------- */

struct ArcParams {
  double eta1 = 0.1;
  double eta2 = 0.9;
  double gamma = 2.0;
  double sigma_min = 1e-8;
  double sigma_max = 1e8;
};

struct ArcDecision {
  bool accept = false;
  double sigma_next = 1.0;
};

/// rho >= eta2: accept and relax sigma; eta1 <= rho < eta2: accept and hold;
/// rho < eta1: reject and tighten.
inline ArcDecision arc_update(double sigma, double rho, const ArcParams& p) {
  if (rho >= p.eta2) return {true, std::max(p.sigma_min, sigma / p.gamma)};
  if (rho >= p.eta1) return {true, sigma};
  return {false, std::min(p.sigma_max, p.gamma * sigma)};
}

/* ---------------------------------------------------------------------- */
/* Run configuration and trace                                             */
/* ---------------------------------------------------------------------- */

struct RunConfig {
  Index l = 0;  // sketch size; 0 means the full tangent dimension
  double sigma0 = 1.0;
  ArcParams arc;
  Index refresh_period = 1;  // fresh sketch every T iterations
  Index max_iter = 1000;
  double grad_tol = 1e-6;
  bool reject_on_increase = true;
  sketching::SketchKind kind = sketching::SketchKind::gaussian;
  sketching::RadialSpec radial;
  uint64_t seed = 0;
  bool timing = true;  // record wall clock per iteration (off for replays)
};

struct TraceRow {
  Index iter = 0;
  double f = 0.0;          // value at the start of the iteration
  double grad_norm = 0.0;  // gradient norm at the start of the iteration
  double sigma = 0.0;      // regularization used by this iteration
  bool accepted = false;
  Index hvp_count = 0;
  double wall_ms = 0.0;
};

template <class Objective>
struct RunResult {
  typename Objective::Point x;
  std::vector<TraceRow> trace;
  bool converged = false;
  double final_f = 0.0;
  double final_grad_norm = 0.0;
  Index total_hvps = 0;

  Index iterations() const { return static_cast<Index>(trace.size()); }
};

inline void validate_config(const RunConfig& cfg, Index dim) {
  Index l = cfg.l == 0 ? dim : cfg.l;
  if (l < 1 || l > dim)
    throw InvalidInput("optimizer: sketch size must be in [1, dim]");
  if (cfg.refresh_period < 1)
    throw InvalidInput("optimizer: refresh period must be >= 1");
  if (!(cfg.arc.eta1 > 0.0 && cfg.arc.eta1 < cfg.arc.eta2))
    throw InvalidInput("optimizer: need 0 < eta1 < eta2");
  if (!(cfg.arc.gamma > 1.0))
    throw InvalidInput("optimizer: gamma must exceed 1");
  if (!(cfg.arc.sigma_min > 0.0 && cfg.arc.sigma_min <= cfg.arc.sigma_max))
    throw InvalidInput("optimizer: sigma bounds must satisfy 0 < min <= max");
  if (cfg.sigma0 < cfg.arc.sigma_min || cfg.sigma0 > cfg.arc.sigma_max)
    throw InvalidInput("optimizer: sigma0 outside [sigma_min, sigma_max]");
  if (cfg.max_iter < 0 || cfg.grad_tol < 0.0)
    throw InvalidInput("optimizer: max_iter and grad_tol must be nonnegative");
}

/* ---------------------------------------------------------------------- */
/* One RRNCN step                                                          */
/* ---------------------------------------------------------------------- */

struct StepDiagnostics {
  double model_decrease = 0.0;  // phi(0) - phi(c)
  double actual_decrease = 0.0;
  double rho = 0.0;
  double sigma_next = 0.0;
  bool accepted = false;
  bool retraction_failed = false;
  Index hvp_count = 0;
  Vector eta;  // tangent step P[v] in coordinates
};

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw StepFailure(std::string("optimizer: non-finite ") + what);
}

}  // namespace detail

/// Build the reduced model on the given sketch (exactly l operator calls),
/// solve it, retract, and apply the ARC acceptance rule. The returned point
/// equals x when the step is rejected.
template <class Objective>
std::pair<typename Objective::Point, StepDiagnostics> rrncn_step(
    const Objective& obj, const typename Objective::Point& x,
    const typename Objective::Space& space,
    const typename Objective::Eval& eval, const sketching::Sketch& sketch,
    double sigma, const RunConfig& cfg) {
  StepDiagnostics diag;
  Index hvps = 0;
  auto op = nystrom::build(sketch, [&](const Vector& v) {
    ++hvps;
    return eval.hvp(v);
  });
  diag.hvp_count = hvps;

  CubicModel model;
  model.q = op.core;
  model.a = sketch.xi.transpose() * eval.grad();
  model.sigma = sigma;
  CubicSolution sol = cubic_subproblem(model);

  diag.eta = sketch.xi * sol.c;
  diag.model_decrease = -sol.model_value;

  double f_cur = eval.value();
  detail::require_finite(f_cur, "objective value");

  if (!(diag.model_decrease > 0.0)) {
    // the sketch contains no usable direction; treat like a rejection so
    // the regularization backs the next attempt
    diag.accepted = false;
    diag.sigma_next = std::min(cfg.arc.sigma_max, cfg.arc.gamma * sigma);
    return {x, diag};
  }

  typename Objective::Point x_new = x;
  try {
    x_new = space.retract(diag.eta);
  } catch (const StepFailure&) {
    diag.retraction_failed = true;
    diag.accepted = false;
    diag.sigma_next = std::min(cfg.arc.sigma_max, cfg.arc.gamma * sigma);
    return {x, diag};
  }

  double f_new = obj.value(x_new);
  detail::require_finite(f_new, "trial objective value");
  diag.actual_decrease = f_cur - f_new;
  diag.rho = diag.actual_decrease / diag.model_decrease;

  ArcDecision dec = arc_update(sigma, diag.rho, cfg.arc);
  diag.accepted = dec.accept;
  diag.sigma_next = dec.sigma_next;
  if (cfg.reject_on_increase && f_new > f_cur && diag.accepted) {
    diag.accepted = false;
    diag.sigma_next = std::min(cfg.arc.sigma_max, cfg.arc.gamma * sigma);
  }
  if (!diag.accepted) return {x, diag};
  return {std::move(x_new), diag};
}

/* ---------------------------------------------------------------------- */
/* Full runs                                                               */
/* ---------------------------------------------------------------------- */

/// Randomized Riemannian Nystrom cubic Newton iteration with lazy sketch
/// refresh: a fresh sketch every refresh_period iterations, the transported
/// one in between. Deterministic under the configured seed.
template <class Objective>
RunResult<Objective> rrncn_run(const Objective& obj,
                               const typename Objective::Point& x0,
                               const RunConfig& cfg) {
  using Space = typename Objective::Space;
  using Eval = typename Objective::Eval;
  using Clock = std::chrono::steady_clock;

  RunResult<Objective> result{x0, {}, false, 0.0, 0.0, 0};
  std::optional<Space> space;
  space.emplace(obj.space(result.x));
  validate_config(cfg, space->dim());
  const Index l = cfg.l == 0 ? space->dim() : cfg.l;

  Rng rng(cfg.seed);
  std::optional<Eval> eval;
  eval.emplace(obj.eval(result.x, *space));
  detail::require_finite(eval->value(), "objective value");
  detail::require_finite(eval->grad().norm(), "gradient");

  double sigma = cfg.sigma0;
  std::optional<sketching::Sketch> sketch;

  for (Index iter = 0; iter < cfg.max_iter; ++iter) {
    double grad_norm = eval->grad().norm();
    if (grad_norm <= cfg.grad_tol) {
      result.converged = true;
      break;
    }
    auto tick = Clock::now();

    if (iter % cfg.refresh_period == 0 || !sketch) {
      Matrix frame = geometry::frame_sample(*space, l, rng);
      sketch = sketching::sample_sketch(*space, frame, cfg.kind, cfg.radial, rng);
    }

    auto [x_next, diag] = rrncn_step(obj, result.x, *space, *eval, *sketch, sigma, cfg);

    TraceRow row;
    row.iter = iter;
    row.f = eval->value();
    row.grad_norm = grad_norm;
    row.sigma = sigma;
    row.accepted = diag.accepted;
    row.hvp_count = diag.hvp_count;
    result.total_hvps += diag.hvp_count;

    if (diag.accepted) {
      bool reuse_next = ((iter + 1) % cfg.refresh_period) != 0;
      if (reuse_next) {
        auto tr = space->transporter(diag.eta, x_next);
        sketch = sketching::transport_sketch(*sketch, tr);
      } else {
        sketch.reset();
      }
      result.x = x_next;
      eval.reset();
      space.emplace(obj.space(result.x));
      eval.emplace(obj.eval(result.x, *space));
      detail::require_finite(eval->value(), "objective value");
      detail::require_finite(eval->grad().norm(), "gradient");
    }
    sigma = diag.sigma_next;

    if (cfg.timing)
      row.wall_ms =
          std::chrono::duration<double, std::milli>(Clock::now() - tick).count();
    result.trace.push_back(row);
  }

  if (!result.converged && eval->grad().norm() <= cfg.grad_tol)
    result.converged = true;
  result.final_f = eval->value();
  result.final_grad_norm = eval->grad().norm();
  return result;
}

/// Cubic Newton with the exact dense Hessian in an orthonormal tangent
/// frame; the reference the sketched method is compared against.
template <class Objective>
RunResult<Objective> full_cubic_newton_run(const Objective& obj,
                                           const typename Objective::Point& x0,
                                           const RunConfig& cfg,
                                           Index dense_cap = 500) {
  using Space = typename Objective::Space;
  using Eval = typename Objective::Eval;
  using Clock = std::chrono::steady_clock;

  RunResult<Objective> result{x0, {}, false, 0.0, 0.0, 0};
  std::optional<Space> space;
  space.emplace(obj.space(result.x));
  if (space->dim() > dense_cap)
    throw InvalidInput("full_cubic_newton_run: tangent dimension exceeds the dense cap");
  {
    RunConfig check = cfg;
    check.l = 0;  // the baseline always works in the full dimension
    validate_config(check, space->dim());
  }

  std::optional<Eval> eval;
  eval.emplace(obj.eval(result.x, *space));
  detail::require_finite(eval->value(), "objective value");
  detail::require_finite(eval->grad().norm(), "gradient");
  double sigma = cfg.sigma0;

  for (Index iter = 0; iter < cfg.max_iter; ++iter) {
    double grad_norm = eval->grad().norm();
    if (grad_norm <= cfg.grad_tol) {
      result.converged = true;
      break;
    }
    auto tick = Clock::now();

    const Matrix& basis = space->tangent_basis();
    const Index d = space->dim();
    CubicModel model;
    model.q.resize(d, d);
    for (Index j = 0; j < d; ++j)
      model.q.col(j) = basis.transpose() * eval->hvp(Vector(basis.col(j)));
    model.q = matfun::symmetrize(model.q);
    model.a = basis.transpose() * eval->grad();
    model.sigma = sigma;
    CubicSolution sol = cubic_subproblem(model);
    double model_decrease = -sol.model_value;

    TraceRow row;
    row.iter = iter;
    row.f = eval->value();
    row.grad_norm = grad_norm;
    row.sigma = sigma;
    row.hvp_count = d;
    result.total_hvps += d;

    bool accepted = false;
    if (model_decrease > 0.0) {
      Vector eta = basis * sol.c;
      bool ok = true;
      typename Objective::Point x_new = result.x;
      try {
        x_new = space->retract(eta);
      } catch (const StepFailure&) {
        ok = false;
      }
      if (ok) {
        double f_new = obj.value(x_new);
        detail::require_finite(f_new, "trial objective value");
        double rho = (row.f - f_new) / model_decrease;
        ArcDecision dec = arc_update(sigma, rho, cfg.arc);
        accepted = dec.accept;
        if (cfg.reject_on_increase && f_new > row.f) accepted = false;
        sigma = accepted ? dec.sigma_next
                         : std::min(cfg.arc.sigma_max, cfg.arc.gamma * sigma);
        if (accepted) {
          result.x = x_new;
          eval.reset();
          space.emplace(obj.space(result.x));
          eval.emplace(obj.eval(result.x, *space));
          detail::require_finite(eval->value(), "objective value");
          detail::require_finite(eval->grad().norm(), "gradient");
        }
      } else {
        sigma = std::min(cfg.arc.sigma_max, cfg.arc.gamma * sigma);
      }
    } else {
      sigma = std::min(cfg.arc.sigma_max, cfg.arc.gamma * sigma);
    }
    row.accepted = accepted;

    if (cfg.timing)
      row.wall_ms =
          std::chrono::duration<double, std::milli>(Clock::now() - tick).count();
    result.trace.push_back(row);
  }

  if (!result.converged && eval->grad().norm() <= cfg.grad_tol)
    result.converged = true;
  result.final_f = eval->value();
  result.final_grad_norm = eval->grad().norm();
  return result;
}

/// x' = R_x(-alpha P*[grad f]); with the one-column selection sketch this is
/// Riemannian coordinate descent, with the full projection sketch a plain
/// gradient step.
template <class Objective>
typename Objective::Point subspace_gradient_step(const Objective& obj,
                                                 const typename Objective::Point& x,
                                                 const sketching::Sketch& sketch,
                                                 double alpha) {
  if (!(alpha > 0.0))
    throw InvalidInput("subspace_gradient_step: alpha must be positive");
  auto space = obj.space(x);
  auto eval = obj.eval(x, space);
  Vector eta = -alpha * sketching::apply_Pstar(sketch, eval.grad());
  return space.retract(eta);
}

}  // namespace optimizer
}  // namespace mannystrom
