#include <gtest/gtest.h>

#include <cmath>

#include "dpglm/losses.hpp"
#include "dpglm/rng.hpp"

namespace {

using dpglm::ModelVector;

TEST(Logistic, ValueAndDerivativeAnchors) {
  const auto loss = dpglm::logistic_loss();
  EXPECT_NEAR(loss.value(0.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(dpglm::select_subgradient(loss.subgradient(0.0, 1.0)), -0.5, 1e-15);
  EXPECT_NEAR(loss.value(50.0, 1.0), 0.0, 1e-15);
  EXPECT_NEAR(loss.value(800.0, -1.0), 800.0, 1e-9);  // stays finite far out
}

TEST(Logistic, GradientMagnitudeAtClippedOptimumExample) {
  // example (x = 1/2, y = +1) at theta = 2 ln 9: |grad| = (1/2)/(1+9)
  ModelVector x(1), theta(1);
  x << 0.5;
  theta << 2.0 * std::log(9.0);
  const ModelVector g = dpglm::per_example_gradient(dpglm::logistic_loss(), x, 1.0, theta);
  EXPECT_NEAR(g.norm(), 0.05, 1e-12);
}

TEST(Absolute, KinkAndLinearRegions) {
  const auto loss = dpglm::absolute_loss();
  const auto iv = loss.subgradient(2.0, 2.0);
  EXPECT_EQ(iv.lo, -1.0);
  EXPECT_EQ(iv.hi, 1.0);
  EXPECT_EQ(dpglm::select_subgradient(iv), 0.0);
  EXPECT_EQ(loss.value(5.0, 2.0), 3.0);
  EXPECT_EQ(dpglm::select_subgradient(loss.subgradient(5.0, 2.0)), 1.0);
}

TEST(SigmoidNonconvex, SymmetryPointAndSaturation) {
  const auto loss = dpglm::sigmoid_nonconvex_loss();
  EXPECT_NEAR(loss.value(0.0, 1.0), 0.5, 1e-15);
  EXPECT_NEAR(dpglm::select_subgradient(loss.subgradient(0.0, 1.0)), -0.25, 1e-15);
  EXPECT_NEAR(loss.value(40.0, 1.0), 0.0, 1e-15);
  EXPECT_NEAR(dpglm::select_subgradient(loss.subgradient(40.0, 1.0)), 0.0, 1e-15);
  EXPECT_FALSE(loss.convex);
}

TEST(SigmoidNonconvex, SecondDerivativeExtremum) {
  // numeric 1-D maximization of |l''| over a fine grid as the oracle
  const auto loss = dpglm::sigmoid_nonconvex_loss();
  const double h = 1e-4;
  double max_abs = 0.0, argmax = 0.0;
  for (double z = -8.0; z <= 8.0; z += 1e-3) {
    const double d2 =
        (loss.value(z + h, 1.0) - 2.0 * loss.value(z, 1.0) + loss.value(z - h, 1.0)) / (h * h);
    if (std::abs(d2) > max_abs) {
      max_abs = std::abs(d2);
      argmax = z;
    }
  }
  EXPECT_NEAR(max_abs, 0.09623, 2e-4);
  EXPECT_LE(max_abs, *loss.smoothness_bound + 1e-4);
  EXPECT_NEAR(std::abs(argmax), std::log(2.0 + std::sqrt(3.0)), 5e-3);
}

TEST(LossFamilies, DeclaredLipschitzHoldsOnSamples) {
  dpglm::RngStream rng(3);
  for (const auto& loss : {dpglm::logistic_loss(), dpglm::absolute_loss(), dpglm::sigmoid_nonconvex_loss()}) {
    for (int i = 0; i < 100000; ++i) {
      const double z = 50.0 * (rng.uniform() - 0.5);
      const double y =
          loss.labels == dpglm::LabelDomain::PlusMinusOne ? (rng.uniform() < 0.5 ? 1.0 : -1.0) : 4.0 * rng.normal();
      const auto iv = loss.subgradient(z, y);
      EXPECT_LE(std::abs(iv.lo), loss.lipschitz_scalar + 1e-12) << loss.name;
      EXPECT_LE(std::abs(iv.hi), loss.lipschitz_scalar + 1e-12) << loss.name;
    }
  }
}

TEST(LossFamilies, SmoothnessBoundHoldsByFiniteDifferences) {
  dpglm::RngStream rng(5);
  for (const auto& loss : {dpglm::logistic_loss(), dpglm::sigmoid_nonconvex_loss()}) {
    const double h = 1e-4;
    for (int i = 0; i < 5000; ++i) {
      const double z = 30.0 * (rng.uniform() - 0.5);
      const double y = rng.uniform() < 0.5 ? 1.0 : -1.0;
      const double d2 = (loss.value(z + h, y) - 2.0 * loss.value(z, y) + loss.value(z - h, y)) / (h * h);
      EXPECT_LE(std::abs(d2), *loss.smoothness_bound + 1e-4) << loss.name;
    }
  }
}

TEST(LossByName, RoundTripAndUnknown) {
  EXPECT_EQ(dpglm::loss_by_name("logistic").name, "logistic");
  EXPECT_EQ(dpglm::loss_by_name("absolute").name, "absolute");
  EXPECT_EQ(dpglm::loss_by_name("sigmoid_nc").name, "sigmoid_nc");
  EXPECT_THROW(dpglm::loss_by_name("hinge"), dpglm::ParamError);
}

TEST(Softmax, UniformPointGivesLogK) {
  const int k = 4;
  const Eigen::Index p = 3;
  std::vector<ModelVector> blocks(k, ModelVector::Zero(p));
  dpglm::SoftmaxExample ex;
  ex.x = ModelVector::LinSpaced(p, 1.0, 3.0);
  ex.y = 1;
  const auto [value, grads] = dpglm::softmax_loss_and_gradient(blocks, ex);
  EXPECT_NEAR(value, std::log(static_cast<double>(k)), 1e-12);
  for (int c = 0; c < k; ++c) {
    const double coeff = 1.0 / k - (c == 0 ? 1.0 : 0.0);
    EXPECT_NEAR((grads[c] - coeff * ex.x).norm(), 0.0, 1e-12);
  }
}

TEST(Softmax, BlocksSumToZero) {
  dpglm::RngStream rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 3 + static_cast<int>(rng.uniform() * 3);
    const Eigen::Index p = 4;
    std::vector<ModelVector> blocks(k, ModelVector::Zero(p));
    for (auto& b : blocks)
      for (Eigen::Index j = 0; j < p; ++j) b[j] = 2.0 * rng.normal();
    dpglm::SoftmaxExample ex;
    ex.x = ModelVector::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) ex.x[j] = rng.normal();
    ex.y = 1 + static_cast<int>(rng.uniform() * k);
    const auto [value, grads] = dpglm::softmax_loss_and_gradient(blocks, ex);
    (void)value;
    ModelVector sum = ModelVector::Zero(p);
    for (const auto& g : grads) sum += g;
    EXPECT_LE(sum.norm(), 1e-12);
  }
}

TEST(Softmax, StackedNormFormulaForLabelOne) {
  // || grad ||_2 = ||x|| sqrt((sum_{k>=2} E_k)^2 + sum_{k>=2} E_k^2) / sum E
  dpglm::RngStream rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 3;
    const Eigen::Index p = 2;
    std::vector<ModelVector> blocks(k, ModelVector::Zero(p));
    for (auto& b : blocks)
      for (Eigen::Index j = 0; j < p; ++j) b[j] = rng.normal();
    dpglm::SoftmaxExample ex;
    ex.x = ModelVector::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) ex.x[j] = rng.normal();
    ex.y = 1;
    const auto [value, grads] = dpglm::softmax_loss_and_gradient(blocks, ex);
    (void)value;
    double e_sum = 0.0, tail_sum = 0.0, tail_sq = 0.0;
    std::vector<double> e(k);
    for (int c = 0; c < k; ++c) {
      e[c] = std::exp(blocks[c].dot(ex.x));
      e_sum += e[c];
    }
    for (int c = 1; c < k; ++c) {
      tail_sum += e[c];
      tail_sq += e[c] * e[c];
    }
    const double formula = ex.x.norm() * std::sqrt(tail_sum * tail_sum + tail_sq) / e_sum;
    EXPECT_NEAR(dpglm::softmax_gradient_norm(grads), formula, 1e-10 * std::max(1.0, formula));

    // ||grad_1|| equals the sum of the other block norms
    double others = 0.0;
    for (int c = 1; c < k; ++c) others += grads[c].norm();
    EXPECT_NEAR(grads[0].norm(), others, 1e-10 * std::max(1.0, others));
  }
}

}  // namespace
