#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "dpglm/data_io.hpp"
#include "dpglm/rng.hpp"
#include "dpglm/subspace.hpp"

namespace {

using dpglm::FeatureMatrix;
using dpglm::GlmDataset;
using dpglm::ModelVector;

GlmDataset random_dataset(int n, int p, int nonzero_cols, dpglm::RngStream& rng) {
  FeatureMatrix x = FeatureMatrix::Zero(n, p);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < nonzero_cols; ++j) x(i, j) = rng.normal();
  return GlmDataset(std::move(x), std::move(y));
}

TEST(FeatureProjector, StandardBasisRows) {
  const int d = 3, p = 6;
  FeatureMatrix x = FeatureMatrix::Zero(d, p);
  for (int i = 0; i < d; ++i) x(i, i) = 1.0;
  const GlmDataset data(x, Eigen::VectorXd::Ones(d));
  const auto m = dpglm::feature_projector(data);
  EXPECT_EQ(m.rank, d);
  const Eigen::MatrixXd proj = m.basis * m.basis.transpose();
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < d; ++i) expected(i, i) = 1.0;
  EXPECT_LE((proj - expected).norm(), 1e-12);
}

TEST(FeatureProjector, ZeroPaddingKeepsRank) {
  dpglm::RngStream rng(3);
  const auto data = random_dataset(20, 7, 7, rng);
  const auto m0 = dpglm::feature_projector(data);
  const auto padded = dpglm::pad_dimensions(data, 50);
  const auto m1 = dpglm::feature_projector(padded);
  EXPECT_EQ(m0.rank, m1.rank);
}

TEST(FeatureProjector, GaussianWideMatrixHasFullRowRank) {
  // independent oracle: rank of the n x p matrix by column-pivoted QR
  dpglm::RngStream rng(5);
  for (std::uint64_t seed : {11u, 22u, 33u}) {
    dpglm::RngStream local(seed);
    const int n = 8, p = 24;
    const auto data = random_dataset(n, p, p, local);
    const auto m = dpglm::feature_projector(data);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(data.features()));
    qr.setThreshold(1e-10);
    EXPECT_EQ(m.rank, static_cast<int>(qr.rank()));
    EXPECT_EQ(m.rank, n);
  }
}

TEST(FeatureProjector, RankMatchesSvdOracleOnLowRankData) {
  dpglm::RngStream rng(7);
  const int n = 30, p = 15, r = 4;
  Eigen::MatrixXd a(n, r), b(r, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < r; ++j) a(i, j) = rng.normal();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < p; ++j) b(i, j) = rng.normal();
  FeatureMatrix x = (a * b).eval();
  const GlmDataset data(x, Eigen::VectorXd::Ones(n));
  const auto m = dpglm::feature_projector(data);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(data.features()));
  int svd_rank = 0;
  for (Eigen::Index j = 0; j < svd.singularValues().size(); ++j)
    if (svd.singularValues()[j] > 1e-10 * svd.singularValues()[0]) ++svd_rank;
  EXPECT_EQ(m.rank, r);
  EXPECT_EQ(m.rank, svd_rank);
}

TEST(FeatureProjector, AllZeroMatrixHasRankZero) {
  FeatureMatrix x = FeatureMatrix::Zero(4, 5);
  const GlmDataset data(x, Eigen::VectorXd::Ones(4));
  const auto m = dpglm::feature_projector(data);
  EXPECT_EQ(m.rank, 0);
  EXPECT_EQ(dpglm::seminorm(ModelVector::Ones(5), m), 0.0);
  EXPECT_EQ(dpglm::project(ModelVector::Ones(5), m).norm(), 0.0);
}

TEST(FeatureProjector, TolerancesValidated) {
  dpglm::RngStream rng(9);
  const auto data = random_dataset(5, 5, 5, rng);
  EXPECT_THROW(dpglm::feature_projector(data, 0.0), dpglm::ParamError);
  EXPECT_THROW(dpglm::feature_projector(data, 1e-2), dpglm::ParamError);
}

TEST(FeatureProjector, BasisOrthonormalProjectorSymmetricIdempotent) {
  dpglm::RngStream rng(11);
  const auto data = random_dataset(12, 9, 5, rng);
  const auto m = dpglm::feature_projector(data);
  const Eigen::MatrixXd gram = m.basis.transpose() * m.basis;
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(m.rank, m.rank)).norm(), 1e-10);
  const Eigen::MatrixXd proj = m.basis * m.basis.transpose();
  EXPECT_LE((proj - proj.transpose()).norm(), 1e-10);
  EXPECT_LE((proj * proj - proj).norm(), 1e-10);
  EXPECT_LE(m.rank, std::min<int>(12, 9));
}

TEST(SeminormAndProject, SpanAndOrthogonalBehavior) {
  dpglm::RngStream rng(13);
  const int n = 6, p = 10;
  const auto data = random_dataset(n, p, 4, rng);  // span inside first 4 coords
  const auto m = dpglm::feature_projector(data);
  ASSERT_EQ(m.rank, 4);

  ModelVector in_span = ModelVector::Zero(p);
  in_span.head(4) << 1.0, -2.0, 0.5, 3.0;
  EXPECT_NEAR(dpglm::seminorm(in_span, m), in_span.norm(), 1e-10);
  EXPECT_LE((dpglm::project(in_span, m) - in_span).norm(), 1e-12);

  ModelVector ortho = ModelVector::Zero(p);
  ortho.tail(p - 4) << 1, 2, 3, 4, 5, 6;
  EXPECT_NEAR(dpglm::seminorm(ortho, m), 0.0, 1e-12);

  EXPECT_THROW(dpglm::seminorm(ModelVector::Ones(p + 1), m), dpglm::ShapeError);
  EXPECT_THROW(dpglm::project(ModelVector::Ones(p + 1), m), dpglm::ShapeError);
}

TEST(SeminormAndProject, SeminormAxiomsAndPythagoras) {
  dpglm::RngStream rng(17);
  const auto data = random_dataset(9, 8, 5, rng);
  const auto m = dpglm::feature_projector(data);
  for (int trial = 0; trial < 10000; ++trial) {
    ModelVector u(8), v(8);
    for (int j = 0; j < 8; ++j) {
      u[j] = rng.normal();
      v[j] = rng.normal();
    }
    const double a = 4.0 * (rng.uniform() - 0.5);
    EXPECT_LE(dpglm::seminorm(u + v, m), dpglm::seminorm(u, m) + dpglm::seminorm(v, m) + 1e-12);
    EXPECT_NEAR(dpglm::seminorm(a * v, m), std::abs(a) * dpglm::seminorm(v, m), 1e-10);
    const ModelVector pv = dpglm::project(v, m);
    EXPECT_LE((dpglm::project(pv, m) - pv).norm(), 1e-12);  // idempotent
    EXPECT_NEAR(v.squaredNorm(), pv.squaredNorm() + (v - pv).squaredNorm(), 1e-10);
  }
}

TEST(SeminormAndProject, IsotropicGaussianEnergyMatchesRank) {
  // E || b ||_M^2 = rank * sigma^2 for isotropic Gaussian noise
  dpglm::RngStream data_rng(19);
  const int p = 32, r = 6;
  const auto data = random_dataset(40, p, r, data_rng);
  const auto m = dpglm::feature_projector(data);
  ASSERT_EQ(m.rank, r);
  const double sigma = 0.7;
  dpglm::RngStream rng(21);
  const int draws = 100000;
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    const ModelVector b = rng.gaussian_vector(p, sigma);
    const double s = dpglm::seminorm(b, m);
    acc += s * s;
  }
  const double estimate = acc / draws;
  const double expected = r * sigma * sigma;
  EXPECT_NEAR(estimate, expected, 0.02 * expected);
}

}  // namespace
