#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "mannystrom/matrix_functions.hpp"
#include "mannystrom/sketching.hpp"

namespace mannystrom {
namespace nystrom {

/// Low-rank surrogate H_N = (H P) (P* H P)^+ (H P)* of a self-adjoint PSD
/// tangent-space operator, stored through the l operator images H[xi_i]
/// and the l x l core matrix Q_ij = <xi_i, H xi_j>.
struct NystromOp {
  sketching::Sketch sketch;
  Matrix h_xi;  // coord_dim x l, columns H[xi_i]
  Matrix core;  // symmetrized Q
  matfun::SpectralFactorization core_eig;
  double rtol = 0.0;  // relative eigenvalue cut for core pseudo-inversion

  Index l() const { return core.rows(); }
};

namespace detail {

/// Q^+ w through the stored factorization, dropping eigenvalues at or
/// below rtol * lambda_max (and any nonpositive ones).
inline Vector core_pinv_apply(const NystromOp& op, const Vector& w) {
  const Vector& lam = op.core_eig.eigenvalues;
  double lmax = lam.size() ? std::max(lam(0), 0.0) : 0.0;
  double cut = op.rtol * lmax;
  Vector t = op.core_eig.vectors.transpose() * w;
  for (Index i = 0; i < t.size(); ++i)
    t(i) = (lam(i) > cut && lam(i) > 0.0) ? t(i) / lam(i) : 0.0;
  return op.core_eig.vectors * t;
}

}  // namespace detail

/// Assemble the approximation with exactly l applications of the operator.
/// The core is spot-checked for symmetry; a violation means the supplied
/// action is not self-adjoint in the metric.
template <class HAction>
NystromOp build(const sketching::Sketch& sk, HAction&& h_action, double rtol = -1.0) {
  const Index l = sk.l();
  if (l == 0) throw InvalidInput("nystrom::build: empty sketch");
  NystromOp op;
  op.sketch = sk;
  op.h_xi.resize(sk.xi.rows(), l);
  for (Index j = 0; j < l; ++j) op.h_xi.col(j) = h_action(sk.xi.col(j));
  Matrix q = sk.xi.transpose() * op.h_xi;
  double scale = matfun::max_abs(q);
  if (matfun::max_abs(q - q.transpose()) > 1e-8 * scale)
    throw ContractViolation("nystrom::build: core is not symmetric; operator "
                            "action violates self-adjointness");
  op.core = matfun::symmetrize(q);
  op.core_eig = matfun::sym_eig(op.core);
  op.rtol = rtol >= 0.0 ? rtol
                        : static_cast<double>(l) * std::numeric_limits<double>::epsilon();
  return op;
}

/// H_N[u], using only stored quantities (no further operator calls).
inline Vector apply(const NystromOp& op, const Vector& u) {
  if (u.size() != op.h_xi.rows())
    throw InvalidInput("nystrom::apply: coordinate size mismatch");
  Vector w = op.h_xi.transpose() * u;
  return op.h_xi * detail::core_pinv_apply(op, w);
}

/// Pseudo-inverse solve: H_N^+ [b] = sum_i (Q^+ a)_i xi_i with a_i = <xi_i, b>.
inline Vector solve_pinv(const NystromOp& op, const Vector& b) {
  if (b.size() != op.sketch.xi.rows())
    throw InvalidInput("nystrom::solve_pinv: coordinate size mismatch");
  Vector a = op.sketch.xi.transpose() * b;
  return op.sketch.xi * detail::core_pinv_apply(op, a);
}

/// Ridge solve through the core: coefficients of (Q + nu I)^{-1} a.
inline Vector solve_ridge(const NystromOp& op, const Vector& b, double nu) {
  if (nu <= 0.0) throw InvalidInput("nystrom::solve_ridge: nu must be positive");
  if (b.size() != op.sketch.xi.rows())
    throw InvalidInput("nystrom::solve_ridge: coordinate size mismatch");
  const Vector& lam = op.core_eig.eigenvalues;
  for (Index i = 0; i < lam.size(); ++i)
    if (std::abs(lam(i) + nu) < 1e-14 * (1.0 + std::abs(nu)))
      throw DegenerateInput("nystrom::solve_ridge: shifted core is singular");
  Vector a = op.sketch.xi.transpose() * b;
  Vector t = op.core_eig.vectors.transpose() * a;
  for (Index i = 0; i < t.size(); ++i) t(i) /= (lam(i) + nu);
  return op.sketch.xi * (op.core_eig.vectors * t);
}

/// Diagnostic-only variant regularizing inside the reduced inverse:
/// pseudo-solve of Q (Q + nu I)^{-1} Q c = a. Typically worse conditioned
/// than solve_ridge and kept off every solver path.
inline Vector solve_ridge_reduced(const NystromOp& op, const Vector& b, double nu) {
  if (nu <= 0.0)
    throw InvalidInput("nystrom::solve_ridge_reduced: nu must be positive");
  if (b.size() != op.sketch.xi.rows())
    throw InvalidInput("nystrom::solve_ridge_reduced: coordinate size mismatch");
  Vector a = op.sketch.xi.transpose() * b;
  const Vector& lam = op.core_eig.eigenvalues;
  double lmax = lam.size() ? std::max(lam(0), 0.0) : 0.0;
  double cut = op.rtol * lmax;
  Vector t = op.core_eig.vectors.transpose() * a;
  for (Index i = 0; i < t.size(); ++i) {
    double li = lam(i);
    t(i) = (li > cut && li > 0.0) ? t(i) * (li + nu) / (li * li) : 0.0;
  }
  return op.sketch.xi * (op.core_eig.vectors * t);
}

/* ---------------------------------------------------------------------- */
/* A-priori error bounds                                                   */
/* ---------------------------------------------------------------------- */

inline void require_spectrum(const Vector& lam, const char* where) {
  for (Index i = 0; i + 1 < lam.size(); ++i)
    if (lam(i) < lam(i + 1) - 1e-12 * std::max(1.0, std::abs(lam(0))))
      throw InvalidInput(std::string(where) + ": spectrum must be nonincreasing");
  if (lam.size() && lam(lam.size() - 1) < -1e-12 * std::max(1.0, std::abs(lam(0))))
    throw InvalidInput(std::string(where) + ": spectrum must be nonnegative");
}

struct BoundParams {
  double rho_hs = 1.0;
  double rho_op = 1.0;
  double c0 = 3.0 * 2.718281828459045 * 2.718281828459045 + 1.0;
};

inline void require_bound_params(const BoundParams& params, const char* where) {
  if (params.rho_hs < 1.0 || params.rho_op < 1.0 || params.rho_hs > params.rho_op)
    throw InvalidInput(std::string(where) + ": need 1 <= rho_hs <= rho_op");
  if (params.c0 <= 0.0)
    throw InvalidInput(std::string(where) + ": c0 must be positive");
}

/// Expected operator-norm error bound for Gaussian sketching:
/// min over 2 <= p <= l-2 of
///   (1 + 2(l-p)/(p-1)) lambda_{l-p+1} + (2 e^2 l / (p^2-1)) sum_{j>l-p} lambda_j.
inline double gaussian_bound(const Vector& lam, Index l, Index* argmin_p = nullptr) {
  require_spectrum(lam, "gaussian_bound");
  const Index d = lam.size();
  if (l < 4 || l > d)
    throw InvalidInput("gaussian_bound: need 4 <= l <= d");
  const double e2 = 2.718281828459045 * 2.718281828459045;
  double best = std::numeric_limits<double>::infinity();
  Index best_p = 2;
  for (Index p = 2; p <= l - 2; ++p) {
    double head = lam(l - p);  // lambda_{l-p+1}, one-indexed
    double tail = lam.segment(l - p, d - (l - p)).sum();
    double val = (1.0 + 2.0 * double(l - p) / double(p - 1)) * head +
                 (2.0 * e2 * double(l) / double(p * p - 1)) * tail;
    if (val < best) {
      best = val;
      best_p = p;
    }
  }
  if (argmin_p) *argmin_p = best_p;
  return best;
}

/// Haar-Grassmann counterpart with radial distortion factors rho_hs,
/// rho_op and universal constant c0. With rho = 1 and c0 = e^2 this
/// reproduces gaussian_bound exactly.
inline double haar_bound(const Vector& lam, Index l, const BoundParams& params,
                         Index* argmin_p = nullptr) {
  require_spectrum(lam, "haar_bound");
  require_bound_params(params, "haar_bound");
  const Index d = lam.size();
  if (l < 4 || l > d) throw InvalidInput("haar_bound: need 4 <= l <= d");
  double best = std::numeric_limits<double>::infinity();
  Index best_p = 2;
  for (Index p = 2; p <= l - 2; ++p) {
    double head = lam(l - p);
    double tail = lam.segment(l - p, d - (l - p)).sum();
    double val = (1.0 + 2.0 * params.rho_hs * double(l - p) / double(p - 1)) * head +
                 2.0 * params.c0 * params.rho_op * double(l) / double(p * p - 1) * tail;
    if (val < best) {
      best = val;
      best_p = p;
    }
  }
  if (argmin_p) *argmin_p = best_p;
  return best;
}

/// Stable-rank form at l = 2p-1:
///   (1 + 2 rho_hs + 4 c0 rho_op sr_p / p) lambda_p,  sr_p = sum_{j>=p} lambda_j / lambda_p.
inline double stable_rank_bound(const Vector& lam, Index p,
                                const BoundParams& params,
                                bool* degenerate = nullptr,
                                double* stable_rank = nullptr) {
  require_spectrum(lam, "stable_rank_bound");
  require_bound_params(params, "stable_rank_bound");
  const Index d = lam.size();
  if (p < 2 || 2 * p - 1 > d)
    throw InvalidInput("stable_rank_bound: need p >= 2 and 2p-1 <= d");
  if (degenerate) *degenerate = false;
  if (stable_rank) *stable_rank = 0.0;
  double lp = lam(p - 1);
  if (lp <= 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  double sr = lam.segment(p - 1, d - (p - 1)).sum() / lp;
  if (stable_rank) *stable_rank = sr;
  return (1.0 + 2.0 * params.rho_hs +
          4.0 * params.c0 * params.rho_op * sr / double(p)) * lp;
}

/// Resolvent perturbation bound: ||(H_N + nu)^{-1} - (H + nu)^{-1}|| <=
/// delta / (nu (lambda_min + nu)).
inline double resolvent_bound(double delta, double lambda_min, double nu) {
  if (nu <= 0.0) throw InvalidInput("resolvent_bound: nu must be positive");
  if (delta < 0.0 || lambda_min < 0.0)
    throw InvalidInput("resolvent_bound: delta and lambda_min must be nonnegative");
  return delta / (nu * (lambda_min + nu));
}

/* ---------------------------------------------------------------------- */
/* Densification and empirical error                                      */
/* ---------------------------------------------------------------------- */

/// Matrix of a tangent-space operator in the orthonormal reference frame.
/// Costs dim() operator applications; refuses large dimensions unless forced.
template <class Space, class Fn>
Matrix densify(const Space& space, Fn&& op_apply, Index cap = 500, bool force = false) {
  const Index d = space.dim();
  if (d > cap && !force)
    throw InvalidInput("densify: tangent dimension exceeds cap; pass force to override");
  const Matrix& basis = space.tangent_basis();
  Matrix out(d, d);
  for (Index j = 0; j < d; ++j)
    out.col(j) = basis.transpose() * op_apply(Vector(basis.col(j)));
  return out;
}

/// Operator-norm error ||H - H_N|| measured by densifying both operators.
/// Optionally reports the full descending spectrum of H - H_N, which is the
/// quantity the Loewner checks look at.
template <class Space, class HAction>
double empirical_error(const Space& space, HAction&& h_action, const NystromOp& op,
                       Index cap = 500, bool force = false,
                       Vector* diff_eigenvalues = nullptr) {
  Matrix dh = densify(space, h_action, cap, force);
  Matrix dn = densify(space, [&](const Vector& v) { return apply(op, v); }, cap, force);
  auto eig = matfun::sym_eig(matfun::symmetrize(dh - dn));
  if (diff_eigenvalues) *diff_eigenvalues = eig.eigenvalues;
  double lo = eig.eigenvalues(eig.eigenvalues.size() - 1);
  double hi = eig.eigenvalues(0);
  return std::max(std::abs(lo), std::abs(hi));
}

}  // namespace nystrom
}  // namespace mannystrom
