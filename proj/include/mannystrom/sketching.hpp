#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "mannystrom/manifold.hpp"
#include "mannystrom/matrix_functions.hpp"
#include "mannystrom/rng.hpp"

namespace mannystrom {
namespace sketching {

enum class SketchKind { gaussian, haar_isometric, haar_radial, projection };

inline const char* kind_name(SketchKind k) {
  switch (k) {
    case SketchKind::gaussian: return "gaussian";
    case SketchKind::haar_isometric: return "haar_isometric";
    case SketchKind::haar_radial: return "haar_radial";
    case SketchKind::projection: return "projection";
  }
  return "?";
}

enum class RadialMode { isometric, gaussian_polar };

struct RadialSpec {
  RadialMode mode = RadialMode::isometric;
  double scale = -1.0;  // isometric mode; nonpositive means sqrt(d)
};

/// Sketching operator P[v] = sum_i <b_i, v> xi_i, stored as the frame of
/// the domain subspace B and the image vectors xi_i = F[b_i]. The
/// coefficient matrix omega (xi in the canonical reference frame) is kept
/// when the coordinates are themselves canonical, for diagnostics.
struct Sketch {
  Matrix basis;  // coord_dim x l, orthonormal columns
  Matrix xi;     // coord_dim x l
  Matrix omega;  // dim x l or empty
  SketchKind kind = SketchKind::gaussian;

  Index l() const { return basis.cols(); }
};

template <class Space>
void require_frame(const Space& space, const Matrix& frame, const char* where) {
  if (!geometry::frame_ok(space, frame))
    throw InvalidInput(std::string(where) + ": frame is not an orthonormal tangent frame");
}

/// Gaussian sketching: xi_i are i.i.d. standard normal tangent vectors,
/// equivalently coefficients are i.i.d. N(0,1) in any orthonormal frame.
template <class Space>
Sketch sample_gaussian(const Space& space, const Matrix& frame, Rng& rng) {
  require_frame(space, frame, "sample_gaussian");
  Sketch sk;
  sk.basis = frame;
  sk.kind = SketchKind::gaussian;
  sk.xi.resize(space.coord_dim(), frame.cols());
  for (Index j = 0; j < frame.cols(); ++j) sk.xi.col(j) = space.gaussian(rng);
  if (space.coord_dim() == space.dim()) sk.omega = sk.xi;
  return sk;
}

/// Haar-Grassmann sketching: orthonormalize l i.i.d. Gaussian tangents
/// (QR with positive diagonal), then apply the radial factor. Isometric
/// mode scales by sqrt(d); gaussian_polar uses the polar radial factor of
/// the same Gaussian draw, making the coefficients exactly Gaussian.
template <class Space>
Sketch sample_haar_grassmann(const Space& space, const Matrix& frame,
                             const RadialSpec& radial, Rng& rng) {
  require_frame(space, frame, "sample_haar_grassmann");
  const Index l = frame.cols();
  for (int attempt = 0; attempt < 3; ++attempt) {
    Matrix g(space.coord_dim(), l);
    for (Index j = 0; j < l; ++j) g.col(j) = space.gaussian(rng);
    Matrix q;
    try {
      q = matfun::orthonormalize(g);
    } catch (const RankDeficiency&) {
      continue;
    }
    Sketch sk;
    sk.basis = frame;
    if (radial.mode == RadialMode::isometric) {
      double s = radial.scale > 0.0 ? radial.scale
                                    : std::sqrt(static_cast<double>(space.dim()));
      sk.xi = s * q;
      sk.kind = SketchKind::haar_isometric;
    } else {
      Matrix gram = g.transpose() * g;
      Matrix s = matfun::mat_fun(gram, matfun::FunTag::Sqrt);
      sk.xi = q * s;
      sk.kind = SketchKind::haar_radial;
    }
    if (space.coord_dim() == space.dim()) sk.omega = sk.xi;
    return sk;
  }
  throw RankDeficiency("sample_haar_grassmann: repeated rank deficiency");
}

/// Deterministic sketch with F = identity on B, so P is the orthogonal
/// projection onto B. The l = d full-frame case reproduces the exact
/// operator and is the reference for full-dimension comparisons.
inline Sketch make_projection_sketch(const Matrix& frame) {
  Sketch sk;
  sk.basis = frame;
  sk.xi = frame;
  sk.kind = SketchKind::projection;
  return sk;
}

/// Sample a sketch of the requested kind on a fresh frame.
template <class Space>
Sketch sample_sketch(const Space& space, const Matrix& frame, SketchKind kind,
                     const RadialSpec& radial, Rng& rng) {
  switch (kind) {
    case SketchKind::gaussian:
      return sample_gaussian(space, frame, rng);
    case SketchKind::haar_isometric: {
      RadialSpec spec = radial;
      spec.mode = RadialMode::isometric;
      return sample_haar_grassmann(space, frame, spec, rng);
    }
    case SketchKind::haar_radial: {
      RadialSpec spec = radial;
      spec.mode = RadialMode::gaussian_polar;
      return sample_haar_grassmann(space, frame, spec, rng);
    }
    case SketchKind::projection:
      return make_projection_sketch(frame);
  }
  throw InvalidInput("sample_sketch: unknown kind");
}

inline Vector apply_P(const Sketch& sk, const Vector& v) {
  if (v.size() != sk.basis.rows())
    throw InvalidInput("apply_P: coordinate size mismatch");
  return sk.xi * (sk.basis.transpose() * v);
}

inline Vector apply_Pstar(const Sketch& sk, const Vector& u) {
  if (u.size() != sk.xi.rows())
    throw InvalidInput("apply_Pstar: coordinate size mismatch");
  return sk.basis * (sk.xi.transpose() * u);
}

/// Transport a sketch along a step: one isometry moves the frame and the
/// images jointly, so every pairwise inner product survives exactly and
/// the sketching matrix of F in the moved frames is unchanged.
template <class Transporter>
Sketch transport_sketch(const Sketch& sk, const Transporter& tr) {
  const Index l = sk.l();
  Matrix joint(sk.basis.rows(), 2 * l);
  joint.leftCols(l) = sk.basis;
  joint.rightCols(l) = sk.xi;
  Matrix moved = tr.apply_frame(joint);
  Sketch out;
  out.basis = moved.leftCols(l);
  out.xi = moved.rightCols(l);
  out.kind = sk.kind;
  if (sk.omega.size() > 0 && out.xi.rows() == sk.omega.rows())
    out.omega = out.xi;
  return out;
}

}  // namespace sketching
}  // namespace mannystrom
