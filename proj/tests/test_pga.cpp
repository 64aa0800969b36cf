#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "mannystrom/manifold.hpp"
#include "mannystrom/matrix_functions.hpp"
#include "mannystrom/pga.hpp"
#include "mannystrom/rng.hpp"

using namespace mannystrom;
using geometry::SpdPoint;
using pga::PgaDataset;

namespace {

Matrix random_sym(Index n, double scale, Rng& rng) {
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  return scale * 0.5 * (g + g.transpose());
}

SpdPoint random_spd(Index n, Rng& rng) {
  return SpdPoint(
      matfun::mat_fun(random_sym(n, 0.6, rng), matfun::FunTag::Exp));
}

PgaDataset random_dataset(Index n, Index count, Rng& rng) {
  PgaDataset d;
  for (Index i = 0; i < count; ++i) d.samples.push_back(random_spd(n, rng));
  return d;
}

/// Separated classes: per-class symmetric center, samples are exp of the
/// center plus small symmetric noise.
PgaDataset classed_dataset(Index n, Index per_class, int classes,
                           double noise, Rng& rng) {
  PgaDataset d;
  for (int g = 0; g < classes; ++g) {
    Matrix center = random_sym(n, 0.8, rng);
    for (Index i = 0; i < per_class; ++i) {
      Matrix s = center + random_sym(n, noise, rng);
      d.samples.emplace_back(matfun::mat_fun(s, matfun::FunTag::Exp));
      d.labels.push_back(g);
    }
  }
  return d;
}

PgaDataset cloned_class_dataset(Index n, Index per_class, int classes,
                                Rng& rng) {
  std::vector<Matrix> block;
  for (Index i = 0; i < per_class; ++i)
    block.push_back(random_sym(n, 0.5, rng));
  PgaDataset d;
  for (int g = 0; g < classes; ++g)
    for (const auto& s : block) {
      d.samples.emplace_back(matfun::mat_fun(s, matfun::FunTag::Exp));
      d.labels.push_back(g);
    }
  return d;
}

Matrix frame_cols(Index dim, Index l, Rng& rng) {
  Matrix g(dim, l);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < l; ++j) g(i, j) = rng.normal();
  return matfun::orthonormalize(g);
}

Vector random_unit(Index dim, Rng& rng) {
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = rng.normal();
  return v / v.norm();
}

double min_eig(const Matrix& a) {
  return matfun::sym_eig(matfun::symmetrize(a)).eigenvalues.minCoeff();
}

}  // namespace

TEST_CASE("spectrum flooring produces positive definite points") {
  Rng rng(101);
  Matrix u = frame_cols(3, 3, rng);
  Vector lam(3);
  lam << -1.0, 0.0, 2.0;
  Matrix sym = u * lam.asDiagonal() * u.transpose();
  SpdPoint p = pga::floor_spd(matfun::symmetrize(sym));
  Vector got = matfun::sym_eig(p.mat()).eigenvalues;
  CHECK(got(0) == Catch::Approx(2.0).margin(1e-12));
  CHECK(got(1) == Catch::Approx(1e-6).margin(1e-18));
  CHECK(got(2) == Catch::Approx(1e-6).margin(1e-18));

  Matrix spd = u * Vector::LinSpaced(3, 1.0, 3.0).asDiagonal() * u.transpose();
  spd = matfun::symmetrize(spd);
  CHECK((pga::floor_spd(spd).mat() - spd).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("log-euclidean mean closed forms") {
  Rng rng(102);
  SECTION("all samples equal") {
    SpdPoint x = random_spd(4, rng);
    PgaDataset d;
    for (int i = 0; i < 5; ++i) d.samples.push_back(x);
    SpdPoint mu = pga::frechet_mean_log_euclidean(d);
    CHECK((mu.mat() - x.mat()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("scalar log mean") {
    PgaDataset d;
    d.samples.emplace_back(Matrix::Identity(2, 2));
    d.samples.emplace_back(Matrix(std::exp(2.0) * Matrix::Identity(2, 2)));
    SpdPoint mu = pga::frechet_mean_log_euclidean(d);
    Matrix want = std::exp(1.0) * Matrix::Identity(2, 2);
    CHECK((mu.mat() - want).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("single sample") {
    PgaDataset d;
    d.samples.push_back(random_spd(3, rng));
    SpdPoint mu = pga::frechet_mean_log_euclidean(d);
    CHECK((mu.mat() - d.samples[0].mat()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("empty dataset rejected") {
    CHECK_THROWS_AS(pga::frechet_mean_log_euclidean(PgaDataset{}),
                    InvalidInput);
  }
  SECTION("log of the mean is the mean of the logs") {
    PgaDataset d = random_dataset(5, 10, rng);
    SpdPoint mu = pga::frechet_mean_log_euclidean(d);
    Matrix avg = Matrix::Zero(5, 5);
    for (const auto& s : d.samples)
      avg += matfun::mat_fun(s.mat(), matfun::FunTag::Log);
    avg /= 10.0;
    Matrix log_mu = matfun::mat_fun(mu.mat(), matfun::FunTag::Log);
    CHECK((log_mu - avg).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("lifting centers the dataset") {
  Rng rng(103);
  SECTION("dataset equal to its mean lifts to zero") {
    SpdPoint x = random_spd(4, rng);
    PgaDataset d;
    d.samples.push_back(x);
    pga::CovFactor cov = pga::lift(d, pga::frechet_mean_log_euclidean(d));
    CHECK(cov.vectors.cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("two samples lift to opposite vectors") {
    PgaDataset d = random_dataset(4, 2, rng);
    pga::CovFactor cov = pga::lift(d, pga::frechet_mean_log_euclidean(d));
    CHECK((cov.vectors.col(0) + cov.vectors.col(1)).cwiseAbs().maxCoeff() <
          1e-10);
  }
  SECTION("centering residual and coordinate oracle") {
    PgaDataset d = random_dataset(5, 10, rng);
    SpdPoint mu = pga::frechet_mean_log_euclidean(d);
    pga::CovFactor cov = pga::lift(d, mu);
    Vector sum = cov.vectors.rowwise().sum();
    CHECK(sum.norm() < 1e-9);
    double max_norm = 0.0;
    for (Index i = 0; i < cov.count(); ++i)
      max_norm = std::max(max_norm, cov.vectors.col(i).norm());
    CHECK(sum.norm() < 1e-8 * max_norm);
    Matrix log_mu = matfun::mat_fun(mu.mat(), matfun::FunTag::Log);
    for (Index i = 0; i < cov.count(); ++i) {
      Vector want = geometry::sym_to_coords(
          matfun::mat_fun(d.samples[static_cast<std::size_t>(i)].mat(),
                          matfun::FunTag::Log) -
          log_mu);
      CHECK((cov.vectors.col(i) - want).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("covariance factor is self-adjoint, psd, and matches brute force") {
  Rng rng(104);
  PgaDataset d = random_dataset(5, 12, rng);
  pga::CovFactor cov = pga::lift(d, pga::frechet_mean_log_euclidean(d));
  Matrix dense = cov.dense();
  for (int t = 0; t < 50; ++t) {
    Vector u = random_unit(cov.dim(), rng);
    Vector w = random_unit(cov.dim(), rng);
    Vector cu = cov.apply(u);
    CHECK(std::abs(cu.dot(w) - u.dot(cov.apply(w))) < 1e-9);
    CHECK(cu.dot(u) > -1e-10);
    CHECK((cu - dense * u).cwiseAbs().maxCoeff() < 1e-12);
    Vector brute = Vector::Zero(cov.dim());
    for (Index i = 0; i < cov.count(); ++i)
      brute += cov.vectors.col(i).dot(u) * cov.vectors.col(i);
    brute /= static_cast<double>(cov.count());
    CHECK((cu - brute).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(cov.apply(Vector::Ones(3)), InvalidInput);
}

TEST_CASE("compressed covariance matches the dense formula") {
  Rng rng(105);
  PgaDataset d = random_dataset(5, 12, rng);
  pga::CovFactor cov = pga::lift(d, pga::frechet_mean_log_euclidean(d));
  Matrix dense = cov.dense();

  SECTION("dense oracle and apply consistency") {
    Matrix frame = frame_cols(cov.dim(), 6, rng);
    pga::NystromCov nc = pga::nystrom_cov(cov, frame);
    CHECK(nc.applies == 6);
    Matrix pinv = matfun::pinv_psd(frame.transpose() * dense * frame);
    Matrix want = dense * frame * pinv * frame.transpose() * dense;
    CHECK((nc.dense() - want).cwiseAbs().maxCoeff() < 1e-8);
    for (int t = 0; t < 10; ++t) {
      Vector u = random_unit(cov.dim(), rng);
      CHECK((nc.apply(u) - nc.dense() * u).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SECTION("full frame reproduces the covariance") {
    Matrix frame = frame_cols(cov.dim(), cov.dim(), rng);
    pga::NystromCov nc = pga::nystrom_cov(cov, frame);
    CHECK((nc.dense() - dense).cwiseAbs().maxCoeff() < 1e-8);
  }
  SECTION("rank-one covariance recovered from one probe") {
    Index dim = 10;
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = rng.normal();
    pga::CovFactor rank1{SpdPoint(Matrix::Identity(4, 4)), Matrix(v)};
    Vector b = random_unit(dim, rng);
    REQUIRE(std::abs(b.dot(v)) > 1e-3);
    pga::NystromCov nc = pga::nystrom_cov(rank1, Matrix(b));
    CHECK((nc.dense() - v * v.transpose()).cwiseAbs().maxCoeff() <
          1e-8 * v.squaredNorm());
  }
  SECTION("malformed frames rejected") {
    CHECK_THROWS_AS(pga::nystrom_cov(cov, Matrix::Identity(3, 2)),
                    InvalidInput);
    CHECK_THROWS_AS(
        pga::nystrom_cov(cov, Matrix::Zero(cov.dim(), cov.dim() + 1)),
        InvalidInput);
  }
}

TEST_CASE("compression never exceeds the exact covariance") {
  Rng rng(106);
  for (int t = 0; t < 20; ++t) {
    PgaDataset d = random_dataset(4, 8, rng);
    pga::CovFactor cov = pga::lift(d, pga::frechet_mean_log_euclidean(d));
    Matrix dense = cov.dense();
    double top = matfun::sym_eig(dense).eigenvalues(0);
    Index l = 2 + static_cast<Index>(t % 5);
    Matrix frame = frame_cols(cov.dim(), l, rng);
    pga::NystromCov nc = pga::nystrom_cov(cov, frame);
    CHECK(min_eig(dense - nc.dense()) > -1e-8 * top);
    CHECK(min_eig(nc.dense()) > -1e-8 * top);
  }
}

TEST_CASE("nested frames grow the compressed covariance monotonically") {
  Rng rng(107);
  for (int t = 0; t < 10; ++t) {
    PgaDataset d = random_dataset(4, 9, rng);
    pga::CovFactor cov = pga::lift(d, pga::frechet_mean_log_euclidean(d));
    Matrix big = frame_cols(cov.dim(), 8, rng);
    pga::NystromCov wide = pga::nystrom_cov(cov, big);
    pga::NystromCov narrow = pga::nystrom_cov(cov, Matrix(big.leftCols(3)));
    double top = matfun::sym_eig(wide.dense()).eigenvalues(0);
    CHECK(min_eig(wide.dense() - narrow.dense()) > -1e-8 * (top + 1e-30));
  }
}

TEST_CASE("exact eigenpairs") {
  Rng rng(108);
  SECTION("single lifted vector") {
    Index dim = 8;
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = rng.normal();
    pga::CovFactor cov{SpdPoint(Matrix::Identity(3, 3)), Matrix(v)};
    pga::EigPairs eig = pga::top_k_eig(cov, 1);
    REQUIRE(eig.values.size() == 1);
    CHECK(eig.values(0) == Catch::Approx(v.squaredNorm()).epsilon(1e-12));
    CHECK(std::abs(std::abs(eig.vectors.col(0).dot(v / v.norm())) - 1.0) <
          1e-12);
  }
  SECTION("two orthogonal lifted vectors of norms 2 and 1") {
    Index dim = 7;
    Matrix pair = frame_cols(dim, 2, rng);
    Matrix v(dim, 2);
    v.col(0) = 2.0 * pair.col(0);
    v.col(1) = pair.col(1);
    pga::CovFactor cov{SpdPoint(Matrix::Identity(3, 3)), v};
    pga::EigPairs eig = pga::top_k_eig(cov, 2);
    REQUIRE(eig.values.size() == 2);
    CHECK(eig.values(0) == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(eig.values(1) == Catch::Approx(0.5).epsilon(1e-12));
  }
  SECTION("random dataset satisfies the eigen residual bound") {
    PgaDataset d = random_dataset(6, 12, rng);
    pga::CovFactor cov = pga::lift(d, pga::frechet_mean_log_euclidean(d));
    pga::EigPairs eig = pga::top_k_eig(cov, 5);
    REQUIRE(eig.values.size() == 5);
    CHECK_FALSE(eig.truncated);
    double top = eig.values(0);
    for (Index j = 0; j < 5; ++j) {
      Vector u = eig.vectors.col(j);
      CHECK((cov.apply(u) - eig.values(j) * u).norm() < 1e-7 * top);
      if (j > 0) CHECK(eig.values(j) <= eig.values(j - 1) + 1e-15);
      CHECK(eig.values(j) > -1e-10);
    }
    Matrix gram = eig.vectors.transpose() * eig.vectors;
    CHECK((gram - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
    Vector dense_eigs = matfun::sym_eig(cov.dense()).eigenvalues;
    for (Index j = 0; j < 5; ++j)
      CHECK(std::abs(eig.values(j) - dense_eigs(j)) < 1e-10 * (top + 1.0));
  }
  SECTION("rank truncation flags and bad k") {
    PgaDataset d = random_dataset(5, 3, rng);
    pga::CovFactor cov = pga::lift(d, pga::frechet_mean_log_euclidean(d));
    pga::EigPairs eig = pga::top_k_eig(cov, 5);
    CHECK(eig.truncated);
    CHECK(eig.values.size() <= 2);
    CHECK_THROWS_AS(pga::top_k_eig(cov, 0), InvalidInput);
  }
}

TEST_CASE("compressed eigenpairs") {
  Rng rng(109);
  PgaDataset d = random_dataset(6, 12, rng);
  pga::CovFactor cov = pga::lift(d, pga::frechet_mean_log_euclidean(d));
  pga::EigPairs exact = pga::top_k_eig(cov, 5);

  SECTION("residuals against the compressed operator") {
    Matrix frame = frame_cols(cov.dim(), 8, rng);
    pga::NystromCov nc = pga::nystrom_cov(cov, frame);
    pga::EigPairs eig = pga::top_k_eig(nc, 5);
    REQUIRE(eig.values.size() == 5);
    double top = eig.values(0);
    for (Index j = 0; j < eig.values.size(); ++j) {
      Vector u = eig.vectors.col(j);
      CHECK((nc.apply(u) - eig.values(j) * u).norm() < 1e-7 * top);
    }
    Matrix gram = eig.vectors.transpose() * eig.vectors;
    CHECK((gram - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
    Vector dense_eigs = matfun::sym_eig(nc.dense()).eigenvalues;
    for (Index j = 0; j < eig.values.size(); ++j)
      CHECK(std::abs(eig.values(j) - dense_eigs(j)) < 1e-8 * (top + 1.0));
  }
  SECTION("eigenvalues dominated by the exact ones") {
    for (Index l : {4, 8, 15}) {
      Matrix frame = frame_cols(cov.dim(), l, rng);
      pga::EigPairs eig = pga::top_k_eig(pga::nystrom_cov(cov, frame),
                                         std::min<Index>(5, l));
      for (Index j = 0; j < eig.values.size(); ++j)
        CHECK(eig.values(j) <= exact.values(j) + 1e-8 * exact.values(0));
    }
  }
  SECTION("full frame reproduces the exact eigenpairs and scores") {
    Matrix frame = frame_cols(cov.dim(), cov.dim(), rng);
    pga::EigPairs eig = pga::top_k_eig(pga::nystrom_cov(cov, frame), 5);
    REQUIRE(eig.values.size() == 5);
    for (Index j = 0; j < 5; ++j)
      CHECK(std::abs(eig.values(j) - exact.values(j)) <
            1e-7 * (exact.values(0) + 1.0));
    Matrix sc = pga::scores(cov, eig);
    Matrix sc_exact = pga::scores(cov, exact);
    for (Index j = 0; j < 5; ++j) {
      double dot = sc.col(j).dot(sc_exact.col(j));
      double sign = dot >= 0.0 ? 1.0 : -1.0;
      CHECK((sc.col(j) - sign * sc_exact.col(j)).cwiseAbs().maxCoeff() <
            1e-7 * (1.0 + sc_exact.col(j).cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("scores project onto the components") {
  Rng rng(110);
  SECTION("matches brute-force inner products and is centered") {
    PgaDataset d = random_dataset(5, 10, rng);
    pga::CovFactor cov = pga::lift(d, pga::frechet_mean_log_euclidean(d));
    pga::EigPairs eig = pga::top_k_eig(cov, 4);
    Matrix sc = pga::scores(cov, eig);
    REQUIRE(sc.rows() == 10);
    REQUIRE(sc.cols() == 4);
    for (Index i = 0; i < sc.rows(); ++i)
      for (Index j = 0; j < sc.cols(); ++j)
        CHECK(sc(i, j) ==
              Catch::Approx(cov.vectors.col(i).dot(eig.vectors.col(j)))
                  .margin(1e-14));
    CHECK(sc.colwise().mean().cwiseAbs().maxCoeff() < 1e-8);
  }
  SECTION("alternating signs and orthogonal components") {
    Index dim = 9;
    Matrix pair = frame_cols(dim, 2, rng);
    Matrix v(dim, 4);
    v.col(0) = 2.0 * pair.col(0);
    v.col(1) = -2.0 * pair.col(0);
    v.col(2) = pair.col(1);
    v.col(3) = -pair.col(1);
    pga::CovFactor cov{SpdPoint(Matrix::Identity(3, 3)), v};
    pga::EigPairs eig = pga::top_k_eig(cov, 2);
    REQUIRE(eig.values.size() == 2);
    CHECK(eig.values(0) == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(eig.values(1) == Catch::Approx(0.5).epsilon(1e-12));
    Matrix sc = pga::scores(cov, eig);
    CHECK(std::abs(sc(0, 0)) == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(sc(1, 0) == Catch::Approx(-sc(0, 0)).epsilon(1e-12));
    CHECK(std::abs(sc(2, 0)) < 1e-12);
    CHECK(std::abs(sc(3, 0)) < 1e-12);
    CHECK(std::abs(sc(0, 1)) < 1e-12);
    CHECK(std::abs(sc(2, 1)) == Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("two-group separation statistic") {
  SECTION("hand-computed value") {
    Matrix sc(4, 1);
    sc << 0.0, 2.0, 3.0, 5.0;
    pga::T2Result r = pga::hotelling_t2(sc, {0, 0, 1, 1});
    CHECK(r.value == Catch::Approx(4.5).epsilon(1e-12));
    CHECK_FALSE(r.regularized);
  }
  SECTION("identical group means give zero") {
    Matrix sc(6, 2);
    sc << 1.0, 0.0, -1.0, 2.0, 0.5, -0.5, 1.0, 0.0, -1.0, 2.0, 0.5, -0.5;
    pga::T2Result r = pga::hotelling_t2(sc, {0, 0, 0, 1, 1, 1});
    CHECK(r.value < 1e-10);
  }
  SECTION("degenerate pooled covariance takes the regularized path") {
    Matrix sc(4, 1);
    sc << 0.0, 0.0, 1.0, 1.0;
    pga::T2Result r = pga::hotelling_t2(sc, {0, 0, 1, 1});
    CHECK(r.regularized);
    CHECK(std::isfinite(r.value));
    CHECK(r.value >= 0.0);
  }
  SECTION("invariant under invertible maps of the score space") {
    Rng rng(111);
    Matrix sc(24, 4);
    for (Index i = 0; i < sc.rows(); ++i)
      for (Index j = 0; j < sc.cols(); ++j) sc(i, j) = rng.normal();
    for (Index i = 12; i < 24; ++i) sc(i, 0) += 1.5;
    std::vector<int> labels(24, 0);
    for (int i = 12; i < 24; ++i) labels[static_cast<std::size_t>(i)] = 1;
    double base = pga::hotelling_t2(sc, labels).value;
    CHECK(base > 0.0);
    for (int t = 0; t < 10; ++t) {
      Matrix map(4, 4);
      do {
        for (Index i = 0; i < 4; ++i)
          for (Index j = 0; j < 4; ++j) map(i, j) = rng.normal();
      } while (std::abs(map.determinant()) < 0.1);
      double mapped =
          pga::hotelling_t2(Matrix(sc * map.transpose()), labels).value;
      CHECK(std::abs(mapped - base) < 1e-8 * (1.0 + base));
    }
  }
  SECTION("contract violations rejected") {
    Matrix sc(4, 3);
    sc.setZero();
    CHECK_THROWS_AS(pga::hotelling_t2(sc, {0, 0, 1, 1}), InvalidInput);
    Matrix ok(4, 1);
    ok.setZero();
    CHECK_THROWS_AS(pga::hotelling_t2(ok, {0, 1, 1, 1}), InvalidInput);
    CHECK_THROWS_AS(pga::hotelling_t2(ok, {0, 0, 1, 2}), InvalidInput);
    CHECK_THROWS_AS(pga::hotelling_t2(ok, {0, 0, 1}), InvalidInput);
  }
}

TEST_CASE("pairwise separation medians") {
  Rng rng(112);
  auto make_scores = [&](const std::vector<int>& labels, double gap) {
    Matrix sc(static_cast<Index>(labels.size()), 2);
    for (Index i = 0; i < sc.rows(); ++i) {
      int g = labels[static_cast<std::size_t>(i)];
      sc(i, 0) = gap * g + rng.normal();
      sc(i, 1) = rng.normal();
    }
    return sc;
  };

  SECTION("two classes reduce to the two-group statistic") {
    std::vector<int> labels{0, 0, 0, 1, 1, 1};
    Matrix sc = make_scores(labels, 3.0);
    pga::PairwiseT2 p = pga::pairwise_t2_median(sc, labels);
    CHECK(p.median ==
          Catch::Approx(pga::hotelling_t2(sc, labels).value).epsilon(1e-12));
    CHECK(p.pairs.size() == 1);
    CHECK(p.skipped.empty());
  }
  SECTION("identical classes give zero median") {
    Matrix block(4, 2);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 2; ++j) block(i, j) = rng.normal();
    Matrix sc(12, 2);
    sc << block, block, block;
    std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
    pga::PairwiseT2 p = pga::pairwise_t2_median(sc, labels);
    CHECK(p.median < 1e-10);
    CHECK(p.pairs.size() == 3);
  }
  SECTION("three separated classes match pairwise enumeration") {
    std::vector<int> labels;
    for (int g = 0; g < 3; ++g)
      for (int i = 0; i < 6; ++i) labels.push_back(g);
    Matrix sc = make_scores(labels, 4.0);
    pga::PairwiseT2 p = pga::pairwise_t2_median(sc, labels);
    std::vector<double> brute;
    for (int a = 0; a < 3; ++a) {
      for (int b = a + 1; b < 3; ++b) {
        Matrix sub(12, 2);
        std::vector<int> sub_labels;
        Index r = 0;
        for (Index i = 0; i < sc.rows(); ++i) {
          int g = labels[static_cast<std::size_t>(i)];
          if (g != a && g != b) continue;
          sub.row(r++) = sc.row(i);
          sub_labels.push_back(g);
        }
        brute.push_back(pga::hotelling_t2(sub, sub_labels).value);
      }
    }
    std::sort(brute.begin(), brute.end());
    CHECK(p.median == Catch::Approx(brute[1]).epsilon(1e-12));
    CHECK(p.pairs.size() == 3);
  }
  SECTION("undersized classes are skipped") {
    std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1, 2};
    Matrix sc = make_scores(labels, 3.0);
    pga::PairwiseT2 p = pga::pairwise_t2_median(sc, labels);
    REQUIRE(p.skipped.size() == 1);
    CHECK(p.skipped[0] == 2);
    CHECK(p.pairs.size() == 1);
  }
  SECTION("even pair counts average the middle values") {
    std::vector<int> labels;
    for (int g = 0; g < 4; ++g)
      for (int i = 0; i < 6; ++i) labels.push_back(g);
    Matrix sc = make_scores(labels, 2.5);
    pga::PairwiseT2 p = pga::pairwise_t2_median(sc, labels);
    REQUIRE(p.pairs.size() == 6);
    std::vector<double> vals;
    for (const auto& [a, b, v] : p.pairs) {
      (void)a;
      (void)b;
      vals.push_back(v);
    }
    std::sort(vals.begin(), vals.end());
    CHECK(p.median == Catch::Approx(0.5 * (vals[2] + vals[3])).epsilon(1e-12));
  }
  SECTION("no eligible pair is an error") {
    Matrix sc(5, 1);
    sc.setZero();
    CHECK_THROWS_AS(pga::pairwise_t2_median(sc, {0, 0, 0, 1, 2}),
                    InvalidInput);
  }
}

TEST_CASE("memory accounting") {
  pga::MemoryProxy m = pga::memory_proxy(36, 60, 10);
  CHECK(m.exact_bytes == 8 * (60 * 36 + 60 * 60));
  CHECK(m.nystrom_bytes == 8 * (36 * 10 + 10 * 10));
  for (Index l : {5, 10, 35})
    CHECK(pga::memory_proxy(36, 60, l).nystrom_bytes < m.exact_bytes);
}

TEST_CASE("fitted models on synthetic classes") {
  Rng rng(113);
  PgaDataset d = classed_dataset(8, 20, 3, 0.15, rng);
  REQUIRE(d.size() == 60);
  Index k = 5;
  pga::PgaModel exact = pga::fit_exact(d, k);

  SECTION("model invariants") {
    REQUIRE(exact.eig.values.size() == k);
    CHECK_FALSE(exact.eig.truncated);
    Matrix gram = exact.eig.vectors.transpose() * exact.eig.vectors;
    CHECK((gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-8);
    for (Index j = 1; j < k; ++j)
      CHECK(exact.eig.values(j) <= exact.eig.values(j - 1) + 1e-15);
    CHECK(exact.eig.values(k - 1) > -1e-10);
    double max_norm = 0.0;
    for (Index i = 0; i < exact.cov.count(); ++i)
      max_norm = std::max(max_norm, exact.cov.vectors.col(i).norm());
    CHECK(exact.cov.vectors.rowwise().sum().norm() < 1e-8 * max_norm);
    CHECK(exact.score_mat.colwise().mean().cwiseAbs().maxCoeff() < 1e-8);
  }
  SECTION("separated classes produce a large median statistic") {
    pga::PairwiseT2 p = pga::pairwise_t2_median(exact.score_mat, d.labels);
    CHECK(p.median > 10.0);
  }
  SECTION("compressed eigenvalues dominated for every sketch size") {
    for (Index l : {5, 10, 36}) {
      pga::PgaModel nys = pga::fit_nystrom(d, k, l, 42);
      REQUIRE(nys.eig.values.size() >= 1);
      for (Index j = 0; j < nys.eig.values.size(); ++j)
        CHECK(nys.eig.values(j) <=
              exact.eig.values(j) + 1e-8 * exact.eig.values(0));
      Matrix gram = nys.eig.vectors.transpose() * nys.eig.vectors;
      CHECK((gram -
             Matrix::Identity(nys.eig.values.size(), nys.eig.values.size()))
                .cwiseAbs()
                .maxCoeff() < 1e-8);
    }
  }
  SECTION("full-width sketch matches exact scores up to sign") {
    pga::PgaModel nys = pga::fit_nystrom(d, k, 36, 7);
    REQUIRE(nys.eig.values.size() == k);
    for (Index j = 0; j < k; ++j) {
      double dot = nys.score_mat.col(j).dot(exact.score_mat.col(j));
      double sign = dot >= 0.0 ? 1.0 : -1.0;
      CHECK((nys.score_mat.col(j) - sign * exact.score_mat.col(j))
                .cwiseAbs()
                .maxCoeff() <
            1e-7 * (1.0 + exact.score_mat.col(j).cwiseAbs().maxCoeff()));
    }
  }
  SECTION("identical seeds reproduce scores bitwise") {
    pga::PgaModel a = pga::fit_nystrom(d, k, 10, 5);
    pga::PgaModel b = pga::fit_nystrom(d, k, 10, 5);
    CHECK((a.score_mat.array() == b.score_mat.array()).all());
    pga::PgaModel c = pga::fit_exact(d, k);
    CHECK((c.score_mat.array() == exact.score_mat.array()).all());
  }
  SECTION("cloned classes have zero median statistic") {
    PgaDataset same = cloned_class_dataset(8, 20, 3, rng);
    pga::PgaModel m = pga::fit_exact(same, k);
    pga::PairwiseT2 p = pga::pairwise_t2_median(m.score_mat, same.labels);
    CHECK(p.median < 1e-10);
  }
}

TEST_CASE("dataset validation") {
  Rng rng(114);
  PgaDataset d = random_dataset(4, 3, rng);
  d.labels = {0, 1};
  CHECK_THROWS_AS(pga::validate_dataset(d), InvalidInput);
  d.labels.clear();
  d.samples.push_back(random_spd(5, rng));
  CHECK_THROWS_AS(pga::validate_dataset(d), InvalidInput);
}
