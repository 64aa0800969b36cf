#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>

#include "mannystrom/matrix_functions.hpp"
#include "mannystrom/rng.hpp"

namespace mannystrom {
namespace geometry {

using matfun::FunTag;
using matfun::SpectralFactorization;

/* ---------------------------------------------------------------------- */
/* Symmetric-matrix coordinates                                            */
/* ---------------------------------------------------------------------- */

inline Index sym_dim(Index n) { return n * (n + 1) / 2; }

/// Isometric half-vectorization: diagonal entries as-is, off-diagonal
/// entries scaled by sqrt(2), lower triangle in column-major order.
inline Vector sym_to_coords(const Matrix& s) {
  const Index n = s.rows();
  const double rt2 = std::sqrt(2.0);
  Vector v(sym_dim(n));
  Index k = 0;
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i)
      v(k++) = (i == j) ? s(i, j) : rt2 * s(i, j);
  return v;
}

inline Matrix coords_to_sym(const Vector& v, Index n) {
  if (v.size() != sym_dim(n))
    throw InvalidInput("coords_to_sym: size does not match sym_dim(n)");
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  Matrix s(n, n);
  Index k = 0;
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i) {
      double x = v(k++);
      if (i == j) {
        s(i, j) = x;
      } else {
        s(i, j) = inv_rt2 * x;
        s(j, i) = inv_rt2 * x;
      }
    }
  return s;
}

/// Metric inner product; coordinates are isometric, so this is a plain dot.
inline double inner(const Vector& u, const Vector& v) {
  if (u.size() != v.size())
    throw InvalidInput("inner: tangent coordinate sizes differ");
  return u.dot(v);
}

/* ---------------------------------------------------------------------- */
/* SPD manifold, log-Euclidean chart                                       */
/* ---------------------------------------------------------------------- */

class SpdPoint {
 public:
  explicit SpdPoint(Matrix m) : mat_(std::move(m)) {
    matfun::require_symmetric(mat_, "SpdPoint");
    Eigen::LLT<Matrix> llt(matfun::symmetrize(mat_));
    if (llt.info() != Eigen::Success)
      throw InvalidInput("SpdPoint: matrix is not positive definite");
  }
  const Matrix& mat() const { return mat_; }
  Index n() const { return mat_.rows(); }

 private:
  Matrix mat_;
};

/// Identity transport: the log-Euclidean chart is flat and tangents are
/// stored as chart coordinates, which are base independent.
struct SpdTransporter {
  Vector apply(const Vector& v) const { return v; }
  Matrix apply_frame(const Matrix& m) const { return m; }
};

/// Tangent space handle at a base point under the log-Euclidean metric.
/// Tangents are isometric coordinates of the symmetric chart matrix.
class SpdChart {
 public:
  explicit SpdChart(const SpdPoint& base)
      : base_(base.mat()),
        base_eig_(matfun::sym_eig(base_)),
        n_(base.n()) {
    log_base_ = matfun::mat_fun(base_eig_, FunTag::Log);
  }

  Index n() const { return n_; }
  Index dim() const { return sym_dim(n_); }
  Index coord_dim() const { return dim(); }
  const Matrix& base() const { return base_; }
  const Matrix& log_base() const { return log_base_; }
  const SpectralFactorization& base_eig() const { return base_eig_; }

  Vector project(const Vector& v) const {
    if (v.size() != coord_dim())
      throw InvalidInput("SpdChart::project: coordinate size mismatch");
    return v;
  }

  Vector gaussian(Rng& rng) const {
    Vector v(dim());
    for (Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    return v;
  }

  /// Canonical orthonormal reference frame (the coordinate axes).
  Matrix tangent_basis() const { return Matrix::Identity(dim(), dim()); }

  SpdPoint exp_map(const Vector& v) const {
    Matrix s = log_base_ + coords_to_sym(v, n_);
    return SpdPoint(matfun::mat_fun(s, FunTag::Exp));
  }

  Vector log_map(const SpdPoint& y) const {
    if (y.n() != n_) throw InvalidInput("SpdChart::log_map: size mismatch");
    return sym_to_coords(matfun::mat_fun(y.mat(), FunTag::Log) - log_base_);
  }

  SpdPoint retract(const Vector& v) const { return exp_map(v); }

  SpdTransporter transporter(const Vector& /*step*/, const SpdPoint& dest) const {
    if (dest.n() != n_)
      throw InvalidInput("SpdChart::transporter: size mismatch");
    return SpdTransporter{};
  }

 private:
  Matrix base_;
  SpectralFactorization base_eig_;
  Matrix log_base_;
  Index n_;
};

/* ---------------------------------------------------------------------- */
/* Grassmann manifold, orthonormal representatives                         */
/* ---------------------------------------------------------------------- */

class GrassmannPoint {
 public:
  explicit GrassmannPoint(Matrix rep) : rep_(std::move(rep)) {
    if (rep_.rows() < rep_.cols())
      throw InvalidInput("GrassmannPoint: representative must be tall");
    Matrix g = rep_.transpose() * rep_ - Matrix::Identity(rep_.cols(), rep_.cols());
    if (matfun::max_abs(g) > 1e-10)
      throw InvalidInput("GrassmannPoint: columns are not orthonormal");
  }
  const Matrix& rep() const { return rep_; }
  Index n() const { return rep_.rows(); }
  Index p() const { return rep_.cols(); }

 private:
  Matrix rep_;
};

class GrassmannTransporter;

/// Tangent space handle at a Grassmann point. Tangents are vec() of the
/// horizontal matrix Z (X'Z = 0); the embedding is isometric, so inner
/// products of coordinates equal the metric.
class GrassmannSpace {
 public:
  explicit GrassmannSpace(const GrassmannPoint& x)
      : x_(x.rep()), n_(x.n()), p_(x.p()) {}

  Index n() const { return n_; }
  Index p() const { return p_; }
  Index dim() const { return p_ * (n_ - p_); }
  Index coord_dim() const { return n_ * p_; }
  const Matrix& rep() const { return x_; }

  Matrix unvec(const Vector& v) const {
    if (v.size() != coord_dim())
      throw InvalidInput("GrassmannSpace: coordinate size mismatch");
    return Eigen::Map<const Matrix>(v.data(), n_, p_);
  }

  static Vector vec(const Matrix& z) {
    return Eigen::Map<const Vector>(z.data(), z.size());
  }

  Vector project(const Vector& v) const {
    Matrix z = unvec(v);
    z -= x_ * (x_.transpose() * z);
    return vec(z);
  }

  bool is_horizontal(const Vector& v) const {
    Matrix z = unvec(v);
    double scale = 1.0 + matfun::max_abs(z);
    return matfun::max_abs(x_.transpose() * z) <= 1e-10 * scale;
  }

  Vector gaussian(Rng& rng) const {
    Vector v(coord_dim());
    for (Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    return project(v);
  }

  /// Orthonormal reference frame of the horizontal space, built lazily
  /// from an orthonormal complement of the representative. Quadratic in n;
  /// intended for moderate sizes (diagnostics, densification).
  const Matrix& tangent_basis() const {
    if (!basis_) {
      Eigen::HouseholderQR<Matrix> qr(x_);
      Matrix qfull = qr.householderQ();
      Matrix xperp = qfull.rightCols(n_ - p_);
      Matrix b = Matrix::Zero(coord_dim(), dim());
      Index k = 0;
      for (Index col = 0; col < p_; ++col)
        for (Index a = 0; a < n_ - p_; ++a)
          b.block(col * n_, k++, n_, 1) = xperp.col(a);
      basis_ = std::move(b);
    }
    return *basis_;
  }

  GrassmannPoint retract(const Vector& eta) const {
    Matrix z = unvec(eta);
    try {
      auto pf = matfun::polar(x_ + z);
      return GrassmannPoint(pf.orthonormal);
    } catch (const DegenerateInput& e) {
      throw StepFailure(std::string("retract: ") + e.what());
    }
  }

  GrassmannTransporter transporter(const Vector& eta, const GrassmannPoint& dest) const;

 private:
  Matrix x_;
  Index n_, p_;
  mutable std::optional<Matrix> basis_;
};

/// Parallel transport along the geodesic joining the two subspaces,
/// realized as the direct rotation built from their principal vectors.
/// This is a single orthogonal map of the ambient space carrying the
/// horizontal space at the source onto the horizontal space at the
/// destination, so it is an exact linear isometry of whole tangent
/// spaces, not just of the vectors it is handed.
class GrassmannTransporter {
 public:
  GrassmannTransporter(Matrix x, Matrix dest)
      : x_(std::move(x)), dest_(std::move(dest)) {
    const Index p = x_.cols();
    Eigen::JacobiSVD<Matrix> svd(x_.transpose() * dest_,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix px = x_ * svd.matrixU();     // principal vectors at the source
    Matrix py = dest_ * svd.matrixV();  // principal vectors at the target
    if (svd.singularValues()(p - 1) < 0.0 ||
        svd.singularValues()(0) > 1.0 + 1e-8)
      throw DegenerateInput("transporter: invalid principal angles");
    if (svd.singularValues()(p - 1) <= 1e-8)
      throw DegenerateInput("transporter: subspaces nearly orthogonal");
    // keep only the planes that actually rotate
    cos_.resize(p);
    sin_.resize(p);
    e1_.resize(x_.rows(), p);
    e2_.resize(x_.rows(), p);
    Index k = 0;
    for (Index i = 0; i < p; ++i) {
      double c = std::min(svd.singularValues()(i), 1.0);
      double s = std::sqrt(std::max(0.0, 1.0 - c * c));
      if (s <= 1e-14) continue;  // coincident principal directions
      cos_(k) = c;
      sin_(k) = s;
      e1_.col(k) = px.col(i);
      e2_.col(k) = (py.col(i) - c * px.col(i)) / s;
      ++k;
    }
    cos_.conservativeResize(k);
    sin_.conservativeResize(k);
    e1_.conservativeResize(Eigen::NoChange, k);
    e2_.conservativeResize(Eigen::NoChange, k);
  }

  Index coord_dim() const { return x_.size(); }

  Vector apply(const Vector& v) const {
    Index n = x_.rows(), p = x_.cols();
    Matrix w = Eigen::Map<const Matrix>(v.data(), n, p);
    Matrix t = rotate(w);
    t -= dest_ * (dest_.transpose() * t);
    return Eigen::Map<const Vector>(t.data(), t.size());
  }

  Matrix apply_frame(const Matrix& cols) const {
    Matrix out(cols.rows(), cols.cols());
    for (Index j = 0; j < cols.cols(); ++j) out.col(j) = apply(cols.col(j));
    return out;
  }

 private:
  // Rotate by the principal angle inside each (e1, e2) plane, identity on
  // the orthogonal complement.
  Matrix rotate(const Matrix& w) const {
    if (cos_.size() == 0) return w;
    Matrix a = e1_.transpose() * w;
    Matrix b = e2_.transpose() * w;
    Matrix ca = (cos_.array() - 1.0).matrix().asDiagonal() * a;
    Matrix out = w + e1_ * (ca - sin_.asDiagonal() * b) +
                 e2_ * (sin_.asDiagonal() * a +
                        (cos_.array() - 1.0).matrix().asDiagonal() * b);
    return out;
  }

  Matrix x_, dest_;
  Vector cos_, sin_;
  Matrix e1_, e2_;
};

inline GrassmannTransporter GrassmannSpace::transporter(
    const Vector& eta, const GrassmannPoint& dest) const {
  if (dest.n() != n_ || dest.p() != p_)
    throw InvalidInput("GrassmannSpace::transporter: size mismatch");
  (void)eta;  // any isometry between the two tangent spaces serves
  return GrassmannTransporter(x_, dest.rep());
}

/* ---------------------------------------------------------------------- */
/* Frames                                                                  */
/* ---------------------------------------------------------------------- */

template <class Space>
bool frame_ok(const Space& space, const Matrix& frame, double tol = 1e-10) {
  if (frame.rows() != space.coord_dim()) return false;
  Matrix g = frame.transpose() * frame -
             Matrix::Identity(frame.cols(), frame.cols());
  if (matfun::max_abs(g) > tol) return false;
  for (Index j = 0; j < frame.cols(); ++j) {
    Vector c = frame.col(j);
    if ((space.project(c) - c).cwiseAbs().maxCoeff() > tol * (1.0 + c.norm()))
      return false;
  }
  return true;
}

/// Draw l orthonormal tangent vectors: Gram-Schmidt over i.i.d. Gaussian
/// tangents, retrying on (probability-zero) dependence.
template <class Space>
Matrix frame_sample(const Space& space, Index l, Rng& rng) {
  if (l <= 0) throw InvalidInput("frame_sample: l must be positive");
  if (l > space.dim())
    throw InvalidInput("frame_sample: l exceeds tangent dimension");
  for (int attempt = 0; attempt < 3; ++attempt) {
    Matrix g(space.coord_dim(), l);
    for (Index j = 0; j < l; ++j) g.col(j) = space.gaussian(rng);
    try {
      return matfun::orthonormalize(g);
    } catch (const RankDeficiency&) {
      continue;
    }
  }
  throw RankDeficiency("frame_sample: repeated rank deficiency");
}

}  // namespace geometry
}  // namespace mannystrom
