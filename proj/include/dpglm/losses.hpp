#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dpglm/core.hpp"
#include "dpglm/errors.hpp"

namespace dpglm {
namespace detail {

// 1 / (1 + e^u) without overflow for large |u|.
inline double inv1pexp(double u) {
  if (u > 0.0) {
    const double t = std::exp(-u);
    return t / (1.0 + t);
  }
  return 1.0 / (1.0 + std::exp(u));
}

// log(1 + e^u), stable across the whole real line.
inline double log1pexp(double u) {
  if (u > 0.0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

}  // namespace detail

// log(1 + e^{-y z}), y in {-1,+1}. Smooth, convex, |l'| < 1, |l''| <= 1/4.
inline ScalarLossFamily logistic_loss() {
  ScalarLossFamily f;
  f.name = "logistic";
  f.value = [](double z, double y) { return detail::log1pexp(-y * z); };
  f.subgradient = [](double z, double y) {
    return SubgradientInterval::point(-y * detail::inv1pexp(y * z));
  };
  f.lipschitz_scalar = 1.0;
  f.smoothness_bound = 0.25;
  f.convex = true;
  f.labels = LabelDomain::PlusMinusOne;
  return f;
}

// |z - y| with the full interval [-1, 1] at the kink.
inline ScalarLossFamily absolute_loss() {
  ScalarLossFamily f;
  f.name = "absolute";
  f.value = [](double z, double y) { return std::abs(z - y); };
  f.subgradient = [](double z, double y) {
    if (z > y) return SubgradientInterval::point(1.0);
    if (z < y) return SubgradientInterval::point(-1.0);
    return SubgradientInterval(-1.0, 1.0);
  };
  f.lipschitz_scalar = 1.0;
  f.convex = true;
  f.labels = LabelDomain::AnyReal;
  return f;
}

// 1 / (1 + e^{y z}): smooth, bounded, Lipschitz, non-convex. Stands in for
// the robust-regression losses; every constant below is analytic:
// |l'| <= 1/4 and |l''| attains 1/(6 sqrt 3) at z = -y ln(2 + sqrt 3).
inline ScalarLossFamily sigmoid_nonconvex_loss() {
  ScalarLossFamily f;
  f.name = "sigmoid_nc";
  f.value = [](double z, double y) { return detail::inv1pexp(y * z); };
  f.subgradient = [](double z, double y) {
    const double s = detail::inv1pexp(y * z);
    return SubgradientInterval::point(-y * s * (1.0 - s));
  };
  f.lipschitz_scalar = 0.25;
  f.smoothness_bound = 1.0 / (6.0 * std::sqrt(3.0));
  f.convex = false;
  f.labels = LabelDomain::PlusMinusOne;
  return f;
}

inline bool is_known_loss_name(const std::string& name) {
  return name == "logistic" || name == "absolute" || name == "sigmoid_nc" || name == "softmax";
}

inline ScalarLossFamily loss_by_name(const std::string& name) {
  if (name == "logistic") return logistic_loss();
  if (name == "absolute") return absolute_loss();
  if (name == "sigmoid_nc") return sigmoid_nonconvex_loss();
  if (name == "softmax")
    throw UnsupportedLossError("softmax is multiclass; it is driven through the field checker, not the GLM runner");
  throw ParamError("unknown loss '" + name + "' (expected logistic, absolute, sigmoid_nc or softmax)");
}

// One multiclass example; y is a 1-based class index.
struct SoftmaxExample {
  Eigen::VectorXd x;
  int y = 1;
};

// Cross-entropy value and per-class gradient blocks. Exponentials use
// max-logit subtraction; the blocks sum to the zero vector.
inline std::pair<double, std::vector<ModelVector>> softmax_loss_and_gradient(
    const std::vector<ModelVector>& theta_blocks, const SoftmaxExample& ex) {
  const int k_classes = static_cast<int>(theta_blocks.size());
  if (k_classes < 2) throw ParamError("softmax: need at least two classes");
  if (ex.y < 1 || ex.y > k_classes) throw ParamError("softmax: label out of range");
  const Eigen::Index p = ex.x.size();
  Eigen::VectorXd logits(k_classes);
  for (int k = 0; k < k_classes; ++k) {
    if (theta_blocks[k].size() != p) throw ShapeError("softmax: block dimension mismatch");
    logits[k] = theta_blocks[k].dot(ex.x);
  }
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  const double s = e.sum();
  const double loss = std::log(s) + m - logits[ex.y - 1];
  std::vector<ModelVector> grads(k_classes);
  for (int k = 0; k < k_classes; ++k) {
    const double c = e[k] / s - (k == ex.y - 1 ? 1.0 : 0.0);
    grads[k] = c * ex.x;
  }
  return {loss, std::move(grads)};
}

// Stacked l2 norm of the per-class gradient blocks.
inline double softmax_gradient_norm(const std::vector<ModelVector>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

}  // namespace dpglm
