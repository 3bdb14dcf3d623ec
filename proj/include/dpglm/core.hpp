#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "dpglm/errors.hpp"

namespace dpglm {

using ModelVector = Eigen::VectorXd;
// Row-major so that per-example rows are contiguous in the optimizer loop.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Closed interval of scalar subgradients at a point; lo == hi away from kinks.
struct SubgradientInterval {
  double lo = 0.0;
  double hi = 0.0;

  SubgradientInterval() = default;
  SubgradientInterval(double l, double h) : lo(l), hi(h) {
    if (!(lo <= hi)) throw ParamError("SubgradientInterval: lo must be <= hi");
  }
  static SubgradientInterval point(double v) { return SubgradientInterval(v, v); }
};

// Tie-break used whenever a single subgradient value is needed at a kink:
// pick 0 when the interval contains it (the minimal-norm element, so exact
// stationarity reads as a zero step), otherwise the midpoint.
inline double select_subgradient(const SubgradientInterval& iv) {
  if (iv.lo <= 0.0 && 0.0 <= iv.hi) return 0.0;
  return 0.5 * (iv.lo + iv.hi);
}

enum class LabelDomain { PlusMinusOne, AnyReal };

// One-dimensional loss z -> l(z; y) together with the metadata the optimizer
// and accountant need. GLM losses are composed as l(<theta, x>; y).
struct ScalarLossFamily {
  std::string name;
  std::function<double(double z, double y)> value;
  std::function<SubgradientInterval(double z, double y)> subgradient;
  double lipschitz_scalar = 0.0;  // bound on |d/dz l(z; y)| over all z, y
  std::optional<double> smoothness_bound;
  bool convex = false;
  LabelDomain labels = LabelDomain::AnyReal;
};

// Dense dataset for GLM problems: n feature rows, n scalar responses.
// Immutable after construction; all operations over it are pure.
class GlmDataset {
 public:
  GlmDataset(FeatureMatrix features, Eigen::VectorXd responses,
             std::optional<double> feature_norm_cap = std::nullopt)
      : features_(std::move(features)), responses_(std::move(responses)), feature_norm_cap_(feature_norm_cap) {
    if (features_.rows() < 1 || features_.cols() < 1) throw ShapeError("GlmDataset: need n >= 1 and p >= 1");
    if (responses_.size() != features_.rows()) throw ShapeError("GlmDataset: responses length must equal feature rows");
    if (!features_.allFinite() || !responses_.allFinite()) throw NumericError("GlmDataset: non-finite entries");
    if (feature_norm_cap_ && *feature_norm_cap_ < 0.0) throw ParamError("GlmDataset: feature_norm_cap must be >= 0");
    row_norms_ = features_.rowwise().norm();
    if (feature_norm_cap_) {
      if (row_norms_.maxCoeff() > *feature_norm_cap_ + 1e-9)
        throw ParamError("GlmDataset: a row violates the declared feature_norm_cap");
    }
  }

  Eigen::Index n() const { return features_.rows(); }
  Eigen::Index dim() const { return features_.cols(); }
  const FeatureMatrix& features() const { return features_; }
  const Eigen::VectorXd& responses() const { return responses_; }
  std::optional<double> feature_norm_cap() const { return feature_norm_cap_; }

  auto x(Eigen::Index i) const { return features_.row(i); }
  double y(Eigen::Index i) const { return responses_[i]; }
  double row_norm(Eigen::Index i) const { return row_norms_[i]; }
  double max_row_norm() const { return row_norms_.maxCoeff(); }

 private:
  FeatureMatrix features_;
  Eigen::VectorXd responses_;
  std::optional<double> feature_norm_cap_;
  Eigen::VectorXd row_norms_;
};

inline void check_model_dims(const GlmDataset& data, const ModelVector& theta) {
  if (theta.size() != data.dim()) throw ShapeError("model dimension does not match dataset dimensionality");
  if (!theta.allFinite()) throw NumericError("model vector has non-finite entries");
}

// Throws unless the responses match the loss family's label convention.
inline void validate_label_encoding(const ScalarLossFamily& loss, const GlmDataset& data) {
  if (loss.labels == LabelDomain::PlusMinusOne) {
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      const double y = data.y(i);
      if (y != 1.0 && y != -1.0)
        throw ParamError("loss '" + loss.name + "' expects labels in {-1,+1}; found " + std::to_string(y));
    }
  }
}

// (1/n) sum_i l(<theta, x_i>; y_i)
inline double objective_value(const ScalarLossFamily& loss, const GlmDataset& data, const ModelVector& theta) {
  check_model_dims(data, theta);
  const Eigen::VectorXd z = data.features() * theta;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) acc += loss.value(z[i], data.y(i));
  const double out = acc / static_cast<double>(data.n());
  if (!std::isfinite(out)) throw NumericError("objective_value: non-finite result");
  return out;
}

// Per-example model-space gradient: select(dl/dz) * x.
inline ModelVector per_example_gradient(const ScalarLossFamily& loss, const ModelVector& x, double y,
                                        const ModelVector& theta) {
  if (x.size() != theta.size()) throw ShapeError("per_example_gradient: dimension mismatch");
  const double z = x.dot(theta);
  if (!std::isfinite(z)) throw NumericError("per_example_gradient: non-finite inner product");
  const double c = select_subgradient(loss.subgradient(z, y));
  return c * x;
}

// Averaged subgradient of the objective; lies in span{x_i} by construction.
inline ModelVector full_subgradient(const ScalarLossFamily& loss, const GlmDataset& data, const ModelVector& theta) {
  check_model_dims(data, theta);
  const Eigen::VectorXd z = data.features() * theta;
  Eigen::VectorXd coeff(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) coeff[i] = select_subgradient(loss.subgradient(z[i], data.y(i)));
  ModelVector g = data.features().transpose() * coeff / static_cast<double>(data.n());
  if (!g.allFinite()) throw NumericError("full_subgradient: non-finite result");
  return g;
}

}  // namespace dpglm
