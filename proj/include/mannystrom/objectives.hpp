#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "mannystrom/manifold.hpp"
#include "mannystrom/matrix_functions.hpp"

namespace mannystrom {
namespace geometry {

/* ---------------------------------------------------------------------- */
/* SPD regularized covariance estimation objective                         */
/*                                                                         */
/*   f(X) = w ||log(X^{-1/2} A X^{-1/2})||_F^2                             */
/*        + lambda tr(B X^{-1}) + rho (tr(B X^{-1}))^2                     */
/*                                                                         */
/* Gradient and Hessian actions are exact, assembled from first and        */
/* second Frechet derivatives of exp/log/inv-sqrt on the pullback          */
/* through the log-Euclidean chart at the evaluation point.                */
/* ---------------------------------------------------------------------- */

class SpdObjective {
 public:
  using Point = SpdPoint;
  using Space = SpdChart;

  SpdObjective(Matrix a, Matrix b, double w, double lambda, double rho)
      : a_(std::move(a)), b_(std::move(b)), w_(w), lambda_(lambda), rho_(rho) {
    matfun::require_symmetric(a_, "SpdObjective");
    matfun::require_symmetric(b_, "SpdObjective");
  }

  Space space(const Point& x) const { return SpdChart(x); }

  double value(const Point& x) const {
    auto eig_y = matfun::sym_eig(x.mat());
    Matrix r = matfun::mat_fun(eig_y, matfun::FunTag::InvSqrt);
    Matrix m = matfun::symmetrize(r * a_ * r);
    Matrix lg = matfun::mat_fun(m, matfun::FunTag::Log);
    Matrix yinv = matfun::mat_fun(eig_y, matfun::FunTag::InvSqrt);
    yinv = yinv * yinv;
    double t = (b_ * yinv).trace();
    return w_ * lg.squaredNorm() + lambda_ * t + rho_ * t * t;
  }

  class Eval {
   public:
    Eval(const SpdObjective& obj, const Space& chart) : obj_(obj) {
      using matfun::FunTag;
      eig_y_ = chart.base_eig();
      // log of the base shares eigenvectors with the base
      Vector llog = eig_y_.eigenvalues;
      for (Index i = 0; i < llog.size(); ++i) llog(i) = std::log(llog(i));
      eig_l_ = matfun::SpectralFactorization{llog, eig_y_.vectors};

      r_ = matfun::mat_fun(eig_y_, FunTag::InvSqrt);
      yinv_ = r_ * r_;
      m_ = matfun::symmetrize(r_ * obj_.a_ * r_);
      eig_m_ = matfun::sym_eig(m_);
      lg_ = matfun::mat_fun(eig_m_, FunTag::Log);
      k_ = matfun::frechet_deriv(eig_m_, lg_, FunTag::Log);
      s1_ = matfun::symmetrize(obj_.a_ * r_ * k_ + k_ * r_ * obj_.a_);
      t_ = (obj_.b_ * yinv_).trace();
      n_mat_ = matfun::symmetrize(yinv_ * obj_.b_ * yinv_);

      value_ = obj_.w_ * lg_.squaredNorm() + obj_.lambda_ * t_ + obj_.rho_ * t_ * t_;
      grad_y_ = obj_.w_ * 2.0 * matfun::frechet_deriv(eig_y_, s1_, FunTag::InvSqrt) -
                (obj_.lambda_ + 2.0 * obj_.rho_ * t_) * n_mat_;
      grad_ = sym_to_coords(matfun::frechet_deriv(eig_l_, grad_y_, FunTag::Exp));
    }

    double value() const { return value_; }
    const Vector& grad() const { return grad_; }

    Vector hvp(const Vector& v) const {
      using matfun::FunTag;
      Index n = r_.rows();
      Matrix ev = coords_to_sym(v, n);
      Matrix vdot = matfun::frechet_deriv(eig_l_, ev, FunTag::Exp);

      Matrix dr = matfun::frechet_deriv(eig_y_, vdot, FunTag::InvSqrt);
      Matrix dm = matfun::symmetrize(dr * obj_.a_ * r_ + r_ * obj_.a_ * dr);
      Matrix dlg = matfun::frechet_deriv(eig_m_, dm, FunTag::Log);
      Matrix dk = matfun::frechet_deriv2(eig_m_, lg_, dm, FunTag::Log) +
                  matfun::frechet_deriv(eig_m_, dlg, FunTag::Log);
      Matrix ds1 = matfun::symmetrize(obj_.a_ * dr * k_ + obj_.a_ * r_ * dk +
                                      dk * r_ * obj_.a_ + k_ * dr * obj_.a_);
      Matrix dg1 = 2.0 * (matfun::frechet_deriv2(eig_y_, s1_, vdot, FunTag::InvSqrt) +
                          matfun::frechet_deriv(eig_y_, ds1, FunTag::InvSqrt));
      double dt = -(n_mat_ * vdot).trace();
      Matrix dn = -matfun::symmetrize(yinv_ * vdot * n_mat_ + n_mat_ * vdot * yinv_);
      Matrix hf = obj_.w_ * dg1 - 2.0 * obj_.rho_ * dt * n_mat_ -
                  (obj_.lambda_ + 2.0 * obj_.rho_ * t_) * dn;

      Matrix chart_term = matfun::frechet_deriv2(eig_l_, grad_y_, ev, FunTag::Exp);
      Matrix lifted = matfun::frechet_deriv(eig_l_, hf, FunTag::Exp);
      return sym_to_coords(matfun::symmetrize(chart_term + lifted));
    }

   private:
    const SpdObjective& obj_;
    matfun::SpectralFactorization eig_y_, eig_l_, eig_m_;
    Matrix r_, yinv_, m_, lg_, k_, s1_, n_mat_, grad_y_;
    double t_ = 0.0, value_ = 0.0;
    Vector grad_;
  };

  Eval eval(const Point& /*x*/, const Space& chart) const { return Eval(*this, chart); }

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }

 private:
  friend class Eval;
  Matrix a_, b_;
  double w_, lambda_, rho_;
};

/* ---------------------------------------------------------------------- */
/* Grassmann trace objective  f(X) = -tr(X' A X)                           */
/* ---------------------------------------------------------------------- */

class GrassmannTraceObjective {
 public:
  using Point = GrassmannPoint;
  using Space = GrassmannSpace;

  explicit GrassmannTraceObjective(Vector diag)
      : diag_(std::move(diag)), dense_(false) {}
  explicit GrassmannTraceObjective(Matrix full)
      : full_(std::move(full)), dense_(true) {
    matfun::require_symmetric(full_, "GrassmannTraceObjective");
  }

  Space space(const Point& x) const { return GrassmannSpace(x); }

  Matrix apply_a(const Matrix& m) const {
    return dense_ ? Matrix(full_ * m) : Matrix(diag_.asDiagonal() * m);
  }

  double value(const Point& x) const {
    return -(x.rep().transpose() * apply_a(x.rep())).trace();
  }

  class Eval {
   public:
    Eval(const GrassmannTraceObjective& obj, const Space& space)
        : obj_(obj), x_(space.rep()) {
      ax_ = obj_.apply_a(x_);
      xtax_ = x_.transpose() * ax_;
      value_ = -xtax_.trace();
      Matrix g = -2.0 * (ax_ - x_ * xtax_);
      grad_ = GrassmannSpace::vec(g);
    }

    double value() const { return value_; }
    const Vector& grad() const { return grad_; }

    Vector hvp(const Vector& v) const {
      Index n = x_.rows(), p = x_.cols();
      Matrix z = Eigen::Map<const Matrix>(v.data(), n, p);
      Matrix az = obj_.apply_a(z);
      Matrix h = -2.0 * (az - x_ * (x_.transpose() * az) - z * xtax_);
      return GrassmannSpace::vec(h);
    }

   private:
    const GrassmannTraceObjective& obj_;
    Matrix x_, ax_, xtax_;
    double value_ = 0.0;
    Vector grad_;
  };

  Eval eval(const Point& /*x*/, const Space& space) const { return Eval(*this, space); }

 private:
  Vector diag_;
  Matrix full_;
  bool dense_;
};

}  // namespace geometry
}  // namespace mannystrom
