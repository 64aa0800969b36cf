#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "mannystrom/errors.hpp"

namespace mannystrom {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace matfun {

/// Scalar functions applied to spectra.
enum class FunTag { Log, Exp, Sqrt, InvSqrt };

constexpr double kEigenvalueFloor = 1e-6;

inline bool needs_positive_spectrum(FunTag tag) { return tag != FunTag::Exp; }

inline double fun_value(FunTag tag, double x) {
  switch (tag) {
    case FunTag::Log: return std::log(x);
    case FunTag::Exp: return std::exp(x);
    case FunTag::Sqrt: return std::sqrt(x);
    case FunTag::InvSqrt: return 1.0 / std::sqrt(x);
  }
  return 0.0;
}

inline double fun_deriv(FunTag tag, double x) {
  switch (tag) {
    case FunTag::Log: return 1.0 / x;
    case FunTag::Exp: return std::exp(x);
    case FunTag::Sqrt: return 0.5 / std::sqrt(x);
    case FunTag::InvSqrt: return -0.5 * std::pow(x, -1.5);
  }
  return 0.0;
}

inline double fun_deriv2(FunTag tag, double x) {
  switch (tag) {
    case FunTag::Log: return -1.0 / (x * x);
    case FunTag::Exp: return std::exp(x);
    case FunTag::Sqrt: return -0.25 * std::pow(x, -1.5);
    case FunTag::InvSqrt: return 0.75 * std::pow(x, -2.5);
  }
  return 0.0;
}

inline double max_abs(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

/// Symmetry within 1e-12 * (1 + max |entry|).
inline bool is_symmetric(const Matrix& a) {
  if (a.rows() != a.cols()) return false;
  double tol = 1e-12 * (1.0 + max_abs(a));
  return max_abs(a - a.transpose()) <= tol;
}

inline void require_symmetric(const Matrix& a, const char* where) {
  if (!is_symmetric(a))
    throw InvalidInput(std::string(where) + ": matrix is not symmetric");
}

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Eigenvalues in descending order with a deterministic eigenvector sign:
/// the entry of largest magnitude in each column is positive (ties break
/// toward the lowest row index).
struct SpectralFactorization {
  Vector eigenvalues;  // descending
  Matrix vectors;      // orthonormal columns, vectors.col(i) <-> eigenvalues(i)

  Matrix reconstruct() const {
    return vectors * eigenvalues.asDiagonal() * vectors.transpose();
  }
};

inline SpectralFactorization sym_eig(const Matrix& a) {
  require_symmetric(a, "sym_eig");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
  if (es.info() != Eigen::Success)
    throw DegenerateInput("sym_eig: eigensolver failed to converge");
  Index n = a.rows();
  SpectralFactorization out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  for (Index j = 0; j < n; ++j) {
    Index pivot = 0;
    double best = -1.0;
    for (Index i = 0; i < n; ++i) {
      double mag = std::abs(out.vectors(i, j));
      if (mag > best) {
        best = mag;
        pivot = i;
      }
    }
    if (out.vectors(pivot, j) < 0.0) out.vectors.col(j) = -out.vectors.col(j);
  }
  return out;
}

inline Vector floored_spectrum(const Vector& lambda, FunTag tag, bool floor_flag) {
  Vector lam = lambda;
  if (floor_flag && needs_positive_spectrum(tag))
    lam = lam.cwiseMax(kEigenvalueFloor);
  if (needs_positive_spectrum(tag)) {
    for (Index i = 0; i < lam.size(); ++i)
      if (lam(i) <= 0.0)
        throw DomainError("mat_fun: nonpositive eigenvalue " +
                          std::to_string(lam(i)) + " outside domain");
  }
  return lam;
}

inline Matrix mat_fun(const SpectralFactorization& f, FunTag tag,
                      bool floor_flag = false) {
  Vector lam = floored_spectrum(f.eigenvalues, tag, floor_flag);
  for (Index i = 0; i < lam.size(); ++i) lam(i) = fun_value(tag, lam(i));
  return f.vectors * lam.asDiagonal() * f.vectors.transpose();
}

/// Spectral matrix function f(A) for symmetric A.
inline Matrix mat_fun(const Matrix& a, FunTag tag, bool floor_flag = false) {
  return mat_fun(sym_eig(a), tag, floor_flag);
}

inline double divided_difference(FunTag tag, double a, double b, double tol) {
  if (std::abs(a - b) <= tol) return fun_deriv(tag, 0.5 * (a + b));
  return (fun_value(tag, a) - fun_value(tag, b)) / (a - b);
}

/// Second divided difference, evaluated against the widest spread pair to
/// keep the quotient stable under partial eigenvalue clustering.
inline double divided_difference2(FunTag tag, double a, double b, double c,
                                  double tol) {
  double x = a, y = b, z = c;
  if (std::abs(a - c) < std::abs(a - b)) std::swap(y, z);
  if (std::abs(x - z) < std::abs(b - c)) {
    x = b; y = a; z = c;
  }
  if (std::abs(x - z) <= tol)
    return 0.5 * fun_deriv2(tag, (a + b + c) / 3.0);
  return (divided_difference(tag, x, y, tol) -
          divided_difference(tag, y, z, tol)) / (x - z);
}

/// Frechet derivative of the spectral function at A in direction E:
/// U (Phi .* (U' E U)) U' with first divided differences Phi. Eigenvalue
/// pairs closer than 1e-12 * max|lambda| use the midpoint derivative.
inline Matrix frechet_deriv(const SpectralFactorization& f, const Matrix& e,
                            FunTag tag, bool floor_flag = false) {
  Index n = f.eigenvalues.size();
  if (e.rows() != n || e.cols() != n)
    throw InvalidInput("frechet_deriv: direction has mismatched shape");
  require_symmetric(e, "frechet_deriv");
  Vector lam = floored_spectrum(f.eigenvalues, tag, floor_flag);
  double tol = 1e-12 * lam.cwiseAbs().maxCoeff();
  Matrix et = f.vectors.transpose() * symmetrize(e) * f.vectors;
  Matrix phi(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) {
      double v = divided_difference(tag, lam(i), lam(j), tol);
      phi(i, j) = v;
      phi(j, i) = v;
    }
  return f.vectors * phi.cwiseProduct(et) * f.vectors.transpose();
}

inline Matrix frechet_deriv(const Matrix& a, const Matrix& e, FunTag tag,
                            bool floor_flag = false) {
  return frechet_deriv(sym_eig(a), e, tag, floor_flag);
}

/// Second-order Frechet derivative of the spectral function, as the
/// symmetric bilinear term D^2 f(A)[E1, E2] built from second divided
/// differences. The associated trilinear form <W, D^2 f(A)[E1, E2]> is
/// fully symmetric, which the exact Hessian chains rely on.
inline Matrix frechet_deriv2(const SpectralFactorization& f, const Matrix& e1,
                             const Matrix& e2, FunTag tag,
                             bool floor_flag = false) {
  Index n = f.eigenvalues.size();
  if (e1.rows() != n || e1.cols() != n || e2.rows() != n || e2.cols() != n)
    throw InvalidInput("frechet_deriv2: direction has mismatched shape");
  Vector lam = floored_spectrum(f.eigenvalues, tag, floor_flag);
  double tol = 1e-12 * lam.cwiseAbs().maxCoeff();
  Matrix t1 = f.vectors.transpose() * symmetrize(e1) * f.vectors;
  Matrix t2 = f.vectors.transpose() * symmetrize(e2) * f.vectors;
  Matrix h = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (Index k = 0; k < n; ++k)
        acc += divided_difference2(tag, lam(i), lam(k), lam(j), tol) *
               (t1(i, k) * t2(k, j) + t2(i, k) * t1(k, j));
      h(i, j) = acc;
      h(j, i) = acc;
    }
  return f.vectors * h * f.vectors.transpose();
}

/// Polar decomposition A = U P of an n x l matrix with n >= l.
struct PolarFactors {
  Matrix orthonormal;  // n x l, orthonormal columns
  Matrix psd;          // l x l symmetric positive semidefinite
};

inline PolarFactors polar(const Matrix& a) {
  if (a.rows() < a.cols())
    throw InvalidInput("polar: expected a tall (n >= l) matrix");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  double smax = s.size() ? s(0) : 0.0;
  if (smax <= 0.0 || s(s.size() - 1) <= 1e-10 * smax)
    throw DegenerateInput("polar: input is numerically rank deficient");
  PolarFactors out;
  out.orthonormal = svd.matrixU() * svd.matrixV().transpose();
  out.psd = svd.matrixV() * s.asDiagonal() * svd.matrixV().transpose();
  return out;
}

inline double default_pinv_rtol(Index n) {
  return static_cast<double>(n) * std::numeric_limits<double>::epsilon();
}

/// Spectral pseudoinverse of a (numerically) PSD matrix: eigenvalues above
/// rtol * lambda_max are inverted, the rest are zeroed.
inline Matrix pinv_psd(const SpectralFactorization& f, double rtol = -1.0) {
  Index n = f.eigenvalues.size();
  if (rtol < 0.0) rtol = default_pinv_rtol(n);
  double lmax = n ? std::max(f.eigenvalues(0), 0.0) : 0.0;
  double cut = rtol * lmax;
  Vector inv = Vector::Zero(n);
  for (Index i = 0; i < n; ++i)
    if (f.eigenvalues(i) > cut && f.eigenvalues(i) > 0.0)
      inv(i) = 1.0 / f.eigenvalues(i);
  return f.vectors * inv.asDiagonal() * f.vectors.transpose();
}

inline Matrix pinv_psd(const Matrix& a, double rtol = -1.0) {
  return pinv_psd(sym_eig(a), rtol);
}

/// Pseudoinverse square root: eigenvalues above the cut map to 1/sqrt.
inline Matrix pinv_psd_sqrt(const SpectralFactorization& f, double rtol = -1.0) {
  Index n = f.eigenvalues.size();
  if (rtol < 0.0) rtol = default_pinv_rtol(n);
  double lmax = n ? std::max(f.eigenvalues(0), 0.0) : 0.0;
  double cut = rtol * lmax;
  Vector inv = Vector::Zero(n);
  for (Index i = 0; i < n; ++i)
    if (f.eigenvalues(i) > cut && f.eigenvalues(i) > 0.0)
      inv(i) = 1.0 / std::sqrt(f.eigenvalues(i));
  return f.vectors * inv.asDiagonal() * f.vectors.transpose();
}

/// Modified Gram-Schmidt with a caller-supplied inner product and one
/// re-orthogonalization sweep. Columns whose residual drops below
/// 1e-10 of their original length are reported as dependent.
template <class InnerFn>
Matrix orthonormalize(const Matrix& v, InnerFn&& inner) {
  Matrix q = v;
  Index m = v.cols();
  for (Index j = 0; j < m; ++j) {
    Vector col = q.col(j);
    double orig = std::sqrt(std::max(0.0, inner(col, col)));
    for (int sweep = 0; sweep < 2; ++sweep)
      for (Index i = 0; i < j; ++i) {
        double r = inner(q.col(i), col);
        col -= r * q.col(i);
      }
    double nrm = std::sqrt(std::max(0.0, inner(col, col)));
    if (nrm < 1e-10 * orig || nrm == 0.0)
      throw RankDeficiency("orthonormalize: column " + std::to_string(j) +
                           " is linearly dependent");
    q.col(j) = col / nrm;
  }
  return q;
}

inline Matrix orthonormalize(const Matrix& v) {
  return orthonormalize(v, [](const Vector& a, const Vector& b) { return a.dot(b); });
}

}  // namespace matfun
}  // namespace mannystrom
