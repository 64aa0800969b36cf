#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mannystrom/errors.hpp"
#include "mannystrom/manifold.hpp"
#include "mannystrom/matrix_functions.hpp"
#include "mannystrom/rng.hpp"

namespace mannystrom {
namespace pga {

using geometry::SpdPoint;

/* ---------------------------------------------------------------------- */
/* Dataset                                                                 */
/* ---------------------------------------------------------------------- */

struct PgaDataset {
  std::vector<SpdPoint> samples;
  std::vector<int> labels;  // empty, or one label per sample

  Index size() const { return static_cast<Index>(samples.size()); }
  Index n() const { return samples.empty() ? 0 : samples.front().n(); }
};

inline void validate_dataset(const PgaDataset& data) {
  if (data.samples.empty()) throw InvalidInput("pga: dataset is empty");
  Index n = data.samples.front().n();
  for (const auto& s : data.samples)
    if (s.n() != n) throw InvalidInput("pga: samples have mixed sizes");
  if (!data.labels.empty() &&
      static_cast<Index>(data.labels.size()) != data.size())
    throw InvalidInput("pga: label count does not match sample count");
}

/// Clamp the spectrum of a symmetric matrix from below so it is safely
/// positive definite.
inline SpdPoint floor_spd(const Matrix& sym,
                          double floor = matfun::kEigenvalueFloor) {
  matfun::require_symmetric(sym, "floor_spd");
  auto f = matfun::sym_eig(sym);
  Vector lam = f.eigenvalues.cwiseMax(floor);
  return SpdPoint(
      matfun::symmetrize(f.vectors * lam.asDiagonal() * f.vectors.transpose()));
}

/* ---------------------------------------------------------------------- */
/* Mean and lifted covariance factor                                       */
/* ---------------------------------------------------------------------- */

inline SpdPoint frechet_mean_log_euclidean(const PgaDataset& data) {
  validate_dataset(data);
  Index n = data.n();
  Matrix acc = Matrix::Zero(n, n);
  for (const auto& s : data.samples)
    acc += matfun::mat_fun(s.mat(), matfun::FunTag::Log);
  acc /= static_cast<double>(data.size());
  return SpdPoint(
      matfun::symmetrize(matfun::mat_fun(matfun::symmetrize(acc),
                                         matfun::FunTag::Exp)));
}

/// Empirical covariance of the lifted dataset in factored form.  Column i of
/// `vectors` holds the chart coordinates of sample i relative to the base,
/// and apply(u) = (1/N) sum_i <v_i, u> v_i without densifying.
struct CovFactor {
  SpdPoint base;
  Matrix vectors;  // coord_dim x N

  Index dim() const { return vectors.rows(); }
  Index count() const { return vectors.cols(); }

  Vector apply(const Vector& u) const {
    if (u.size() != dim())
      throw InvalidInput("CovFactor::apply: size mismatch");
    return vectors * (vectors.transpose() * u) / static_cast<double>(count());
  }

  Matrix dense() const {
    return vectors * vectors.transpose() / static_cast<double>(count());
  }
};

inline CovFactor lift(const PgaDataset& data, const SpdPoint& mean) {
  validate_dataset(data);
  geometry::SpdChart chart(mean);
  Matrix v(chart.coord_dim(), data.size());
  for (Index i = 0; i < data.size(); ++i)
    v.col(i) = chart.log_map(data.samples[static_cast<std::size_t>(i)]);
  return CovFactor{mean, std::move(v)};
}

/* ---------------------------------------------------------------------- */
/* Nystrom-compressed covariance                                           */
/* ---------------------------------------------------------------------- */

/// Range-compressed covariance Y S^+ Y^T built from l covariance
/// applications against the frame columns.
struct NystromCov {
  Matrix y;               // coord_dim x l, column j = C[b_j]
  Matrix core;            // l x l, B^T C B
  Matrix core_pinv_sqrt;  // (B^T C B)^{+1/2}
  Index applies = 0;      // covariance applications consumed

  Index dim() const { return y.rows(); }
  Index sketch_size() const { return y.cols(); }

  Vector apply(const Vector& u) const {
    if (u.size() != dim())
      throw InvalidInput("NystromCov::apply: size mismatch");
    Vector t = core_pinv_sqrt * (core_pinv_sqrt * (y.transpose() * u));
    return y * t;
  }

  Matrix dense() const {
    Matrix half = y * core_pinv_sqrt;
    return half * half.transpose();
  }
};

inline NystromCov nystrom_cov(const CovFactor& cov, const Matrix& frame) {
  if (frame.rows() != cov.dim())
    throw InvalidInput("nystrom_cov: frame dimension mismatch");
  if (frame.cols() <= 0 || frame.cols() > cov.dim())
    throw InvalidInput("nystrom_cov: sketch size out of range");
  NystromCov out;
  out.y.resize(cov.dim(), frame.cols());
  for (Index j = 0; j < frame.cols(); ++j) {
    out.y.col(j) = cov.apply(frame.col(j));
    ++out.applies;
  }
  out.core = matfun::symmetrize(frame.transpose() * out.y);
  out.core_pinv_sqrt = matfun::pinv_psd_sqrt(matfun::sym_eig(out.core));
  return out;
}

/* ---------------------------------------------------------------------- */
/* Leading eigenpairs                                                      */
/* ---------------------------------------------------------------------- */

struct EigPairs {
  Vector values;   // descending
  Matrix vectors;  // coord_dim x k, orthonormal columns
  bool truncated = false;
};

namespace detail {

/// Keep the leading eigenpairs of a small factorized problem, mapping each
/// kept eigenvector w back to coordinate space as normalize(map * w).
inline EigPairs lift_eigenpairs(const matfun::SpectralFactorization& f,
                                const Matrix& map, Index k, Index dim) {
  Index m = f.eigenvalues.size();
  double lmax = m ? std::max(f.eigenvalues(0), 0.0) : 0.0;
  double cut = matfun::default_pinv_rtol(std::max(dim, m)) * lmax;
  Index rank = 0;
  while (rank < m && f.eigenvalues(rank) > cut && f.eigenvalues(rank) > 0.0)
    ++rank;
  Index kept = std::min(k, rank);
  EigPairs out;
  out.truncated = kept < k;
  out.values.resize(kept);
  out.vectors.resize(dim, kept);
  for (Index j = 0; j < kept; ++j) {
    out.values(j) = f.eigenvalues(j);
    Vector u = map * f.vectors.col(j);
    double norm = u.norm();
    if (norm <= 0.0)
      throw RankDeficiency("top_k_eig: eigenvector mapped to zero");
    out.vectors.col(j) = u / norm;
  }
  return out;
}

}  // namespace detail

/// Exact path: eigen decomposition of the N x N Gram matrix (1/N) V^T V,
/// eigenvectors mapped back through V.
inline EigPairs top_k_eig(const CovFactor& cov, Index k) {
  if (k <= 0) throw InvalidInput("top_k_eig: k must be positive");
  Matrix gram = matfun::symmetrize(cov.vectors.transpose() * cov.vectors) /
                static_cast<double>(cov.count());
  return detail::lift_eigenpairs(matfun::sym_eig(gram), cov.vectors, k,
                                 cov.dim());
}

/// Compressed path: eigen decomposition of S^{+1/2} (Y^T Y) S^{+1/2},
/// eigenvectors mapped back through Y S^{+1/2}.
inline EigPairs top_k_eig(const NystromCov& nc, Index k) {
  if (k <= 0) throw InvalidInput("top_k_eig: k must be positive");
  Matrix gram = matfun::symmetrize(nc.y.transpose() * nc.y);
  Matrix small = matfun::symmetrize(nc.core_pinv_sqrt * gram *
                                    nc.core_pinv_sqrt);
  Matrix map = nc.y * nc.core_pinv_sqrt;
  return detail::lift_eigenpairs(matfun::sym_eig(small), map, k, nc.dim());
}

/// Score matrix: row i holds <v_i, u_k> for each kept component.
inline Matrix scores(const CovFactor& cov, const EigPairs& eig) {
  if (eig.vectors.rows() != cov.dim())
    throw InvalidInput("scores: component dimension mismatch");
  return cov.vectors.transpose() * eig.vectors;
}

/* ---------------------------------------------------------------------- */
/* Hotelling T2                                                            */
/* ---------------------------------------------------------------------- */

struct T2Result {
  double value = 0.0;
  bool regularized = false;
};

namespace detail {

inline T2Result two_group_t2(const Matrix& a0, const Matrix& a1) {
  Index n0 = a0.rows();
  Index n1 = a1.rows();
  Index k = a0.cols();
  if (a1.cols() != k)
    throw InvalidInput("hotelling_t2: score width mismatch");
  if (n0 < 2 || n1 < 2)
    throw InvalidInput("hotelling_t2: each group needs at least 2 members");
  if (k > n0 + n1 - 2)
    throw InvalidInput(
        "hotelling_t2: more components than pooled degrees of freedom");
  Vector m0 = a0.colwise().mean().transpose();
  Vector m1 = a1.colwise().mean().transpose();
  Matrix c0 = a0.rowwise() - m0.transpose();
  Matrix c1 = a1.rowwise() - m1.transpose();
  Matrix pooled = (c0.transpose() * c0 + c1.transpose() * c1) /
                  static_cast<double>(n0 + n1 - 2);
  pooled = matfun::symmetrize(pooled);
  Vector delta = m0 - m1;

  T2Result out;
  Vector x;
  Eigen::LLT<Matrix> llt(pooled);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    x = llt.solve(delta);
    ok = x.allFinite();
  }
  if (!ok) {
    double tr = pooled.trace();
    double jitter =
        tr > 0.0 ? 1e-10 * tr / static_cast<double>(k) : 1e-10;
    Matrix reg = pooled + jitter * Matrix::Identity(k, k);
    Eigen::LLT<Matrix> llt2(reg);
    if (llt2.info() != Eigen::Success)
      throw RankDeficiency("hotelling_t2: pooled covariance not factorable");
    x = llt2.solve(delta);
    out.regularized = true;
  }
  double scale = static_cast<double>(n0) * static_cast<double>(n1) /
                 static_cast<double>(n0 + n1);
  out.value = std::max(0.0, scale * delta.dot(x));
  return out;
}

}  // namespace detail

/// Two-sample Hotelling T2 over score rows; labels must take exactly two
/// distinct values.
inline T2Result hotelling_t2(const Matrix& score_mat,
                             const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != score_mat.rows())
    throw InvalidInput("hotelling_t2: label count does not match rows");
  std::map<int, std::vector<Index>> groups;
  for (Index i = 0; i < score_mat.rows(); ++i)
    groups[labels[static_cast<std::size_t>(i)]].push_back(i);
  if (groups.size() != 2)
    throw InvalidInput("hotelling_t2: labels must take exactly two values");
  std::vector<Matrix> blocks;
  for (const auto& [label, rows] : groups) {
    (void)label;
    Matrix b(static_cast<Index>(rows.size()), score_mat.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
      b.row(static_cast<Index>(r)) = score_mat.row(rows[r]);
    blocks.push_back(std::move(b));
  }
  return detail::two_group_t2(blocks[0], blocks[1]);
}

struct PairwiseT2 {
  double median = 0.0;
  std::vector<std::tuple<int, int, double>> pairs;  // (class a, class b, T2)
  std::vector<int> skipped;  // classes with fewer than 2 members
  bool regularized = false;
};

/// Median T2 over all unordered pairs of classes with at least 2 members.
inline PairwiseT2 pairwise_t2_median(const Matrix& score_mat,
                                     const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != score_mat.rows())
    throw InvalidInput("pairwise_t2_median: label count does not match rows");
  std::map<int, std::vector<Index>> groups;
  for (Index i = 0; i < score_mat.rows(); ++i)
    groups[labels[static_cast<std::size_t>(i)]].push_back(i);

  PairwiseT2 out;
  std::vector<std::pair<int, std::vector<Index>>> eligible;
  for (const auto& [label, rows] : groups) {
    if (static_cast<Index>(rows.size()) < 2)
      out.skipped.push_back(label);
    else
      eligible.emplace_back(label, rows);
  }
  if (eligible.size() < 2)
    throw InvalidInput(
        "pairwise_t2_median: need at least two classes with two members");

  auto block = [&](const std::vector<Index>& rows) {
    Matrix b(static_cast<Index>(rows.size()), score_mat.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
      b.row(static_cast<Index>(r)) = score_mat.row(rows[r]);
    return b;
  };
  std::vector<double> values;
  for (std::size_t a = 0; a < eligible.size(); ++a) {
    for (std::size_t b = a + 1; b < eligible.size(); ++b) {
      T2Result t = detail::two_group_t2(block(eligible[a].second),
                                        block(eligible[b].second));
      out.pairs.emplace_back(eligible[a].first, eligible[b].first, t.value);
      out.regularized = out.regularized || t.regularized;
      values.push_back(t.value);
    }
  }
  std::sort(values.begin(), values.end());
  std::size_t m = values.size() / 2;
  out.median = values.size() % 2 == 1 ? values[m]
                                      : 0.5 * (values[m - 1] + values[m]);
  return out;
}

/* ---------------------------------------------------------------------- */
/* Memory accounting                                                       */
/* ---------------------------------------------------------------------- */

/// Analytic byte counts for the dominant allocations of each path: lifted
/// vectors plus Gram for the exact path, Y plus core for the compressed one.
struct MemoryProxy {
  std::int64_t exact_bytes = 0;
  std::int64_t nystrom_bytes = 0;
};

inline MemoryProxy memory_proxy(Index dim, Index count, Index l) {
  MemoryProxy m;
  m.exact_bytes = 8 * (count * dim + count * count);
  m.nystrom_bytes = 8 * (dim * l + l * l);
  return m;
}

/* ---------------------------------------------------------------------- */
/* Fitted model                                                            */
/* ---------------------------------------------------------------------- */

struct PgaModel {
  SpdPoint mean;
  CovFactor cov;
  EigPairs eig;
  Matrix score_mat;    // N x k
  std::string method;  // "exact" or "nystrom"
  Index sketch_size = 0;
};

inline PgaModel fit_exact(const PgaDataset& data, Index k) {
  SpdPoint mean = frechet_mean_log_euclidean(data);
  CovFactor cov = lift(data, mean);
  EigPairs eig = top_k_eig(cov, k);
  Matrix sc = scores(cov, eig);
  return PgaModel{std::move(mean), std::move(cov), std::move(eig),
                  std::move(sc), "exact", 0};
}

inline PgaModel fit_nystrom(const PgaDataset& data, Index k, Index l,
                            std::uint64_t seed) {
  SpdPoint mean = frechet_mean_log_euclidean(data);
  CovFactor cov = lift(data, mean);
  geometry::SpdChart chart(mean);
  Rng rng(seed);
  Matrix frame = geometry::frame_sample(chart, l, rng);
  NystromCov nc = nystrom_cov(cov, frame);
  EigPairs eig = top_k_eig(nc, k);
  Matrix sc = scores(cov, eig);
  return PgaModel{std::move(mean), std::move(cov), std::move(eig),
                  std::move(sc), "nystrom", l};
}

}  // namespace pga
}  // namespace mannystrom
