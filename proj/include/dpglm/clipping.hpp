#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dpglm/core.hpp"
#include "dpglm/errors.hpp"

namespace dpglm {

constexpr double kInf = std::numeric_limits<double>::infinity();

// v * min{1, B / ||v||_2}
inline ModelVector clip_vector(const ModelVector& v, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ParamError("clip_vector: clip norm must be positive");
  const double nrm = v.norm();
  if (nrm <= clip_norm) return v;
  return v * (clip_norm / nrm);
}

// Each block clipped to norm B independently.
inline std::vector<ModelVector> per_class_clip(const std::vector<ModelVector>& blocks, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ParamError("per_class_clip: clip norm must be positive");
  std::vector<ModelVector> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(clip_vector(b, clip_norm));
  return out;
}

// The convex surrogate whose gradient field equals the clipped gradient
// field of the base loss: identical to the base on [y1, y2], and extended
// linearly with slope -/+ B/||x|| outside. Scalar argument z = <theta, x>.
class ClippedScalarLoss {
 public:
  ClippedScalarLoss(ScalarLossFamily base, double y, double feature_norm, double clip_norm, double y1, double y2)
      : base_(std::move(base)), y_(y), feature_norm_(feature_norm), clip_norm_(clip_norm), y1_(y1), y2_(y2) {
    if (!(y1_ <= y2_)) throw NumericError("ClippedScalarLoss: crossed thresholds");
    slope_ = (feature_norm_ > 0.0) ? clip_norm_ / feature_norm_ : 0.0;
    f_y1_ = std::isfinite(y1_) ? base_.value(y1_, y_) : 0.0;
    f_y2_ = std::isfinite(y2_) ? base_.value(y2_, y_) : 0.0;
  }

  double value(double z) const {
    if (feature_norm_ == 0.0) return base_.value(0.0, y_);
    if (z < y1_) return -slope_ * (z - y1_) + f_y1_;
    if (z > y2_) return slope_ * (z - y2_) + f_y2_;
    return base_.value(z, y_);
  }

  // Base subgradient interval clamped to [-B/||x||, +B/||x||].
  SubgradientInterval subgradient(double z) const {
    if (feature_norm_ == 0.0) return SubgradientInterval::point(0.0);
    const SubgradientInterval iv = base_.subgradient(z, y_);
    return SubgradientInterval(std::clamp(iv.lo, -slope_, slope_), std::clamp(iv.hi, -slope_, slope_));
  }

  double y1() const { return y1_; }
  double y2() const { return y2_; }
  double slope() const { return slope_; }
  double label() const { return y_; }
  double feature_norm() const { return feature_norm_; }
  double clip_norm() const { return clip_norm_; }
  const ScalarLossFamily& base() const { return base_; }

 private:
  ScalarLossFamily base_;
  double y_;
  double feature_norm_;
  double clip_norm_;
  double y1_, y2_;
  double f_y1_, f_y2_;
  double slope_;
};

namespace detail {

constexpr double kThresholdSearchRange = 1e9;
constexpr double kThresholdSearchTol = 1e-12;

// y2 = inf{z : lo(z) > level}. The scalar subgradient of a convex loss is
// monotone nondecreasing, so bracket-double from 0 and bisect to absolute
// tolerance on z. +inf when the crossing does not happen within |z| <= 1e9
// (saturating losses like logistic on one side).
inline double upper_threshold(const ScalarLossFamily& base, double y, double level) {
  const auto lo = [&](double z) { return base.subgradient(z, y).lo; };
  if (!(lo(kThresholdSearchRange) > level)) return kInf;
  double a, b;  // lo(a) <= level < lo(b)
  if (lo(0.0) > level) {
    b = 0.0;
    a = -1.0;
    while (lo(a) > level) {
      b = a;
      a *= 2.0;
      if (a < -kThresholdSearchRange) throw NumericError("huberize: bracket failure in upper threshold search");
    }
  } else {
    a = 0.0;
    b = 1.0;
    while (!(lo(b) > level)) {
      a = b;
      b = std::min(b * 2.0, kThresholdSearchRange);
    }
  }
  while (b - a > kThresholdSearchTol) {
    const double m = 0.5 * (a + b);
    if (m == a || m == b) break;
    (lo(m) > level ? b : a) = m;
  }
  return b;
}

// y1 = sup{z : hi(z) < -level}; mirror image of upper_threshold.
inline double lower_threshold(const ScalarLossFamily& base, double y, double level) {
  const auto hi = [&](double z) { return base.subgradient(z, y).hi; };
  if (!(hi(-kThresholdSearchRange) < -level)) return -kInf;
  double a, b;  // hi(a) < -level <= hi(b)
  if (hi(0.0) < -level) {
    a = 0.0;
    b = 1.0;
    while (hi(b) < -level) {
      a = b;
      b *= 2.0;
      if (b > kThresholdSearchRange) throw NumericError("huberize: bracket failure in lower threshold search");
    }
  } else {
    b = 0.0;
    a = -1.0;
    while (!(hi(a) < -level)) {
      b = a;
      a = std::max(a * 2.0, -kThresholdSearchRange);
    }
  }
  while (b - a > kThresholdSearchTol) {
    const double m = 0.5 * (a + b);
    if (m == a || m == b) break;
    (hi(m) < -level ? a : b) = m;
  }
  return a;
}

}  // namespace detail

// Generic construction via monotone bisection on the subgradient.
inline ClippedScalarLoss huberize_generic(const ScalarLossFamily& base, double y, double feature_norm,
                                          double clip_norm) {
  if (!base.convex) throw UnsupportedLossError("huberize: base loss must be convex");
  if (!(clip_norm > 0.0)) throw ParamError("huberize: clip norm must be positive");
  if (feature_norm < 0.0) throw ParamError("huberize: feature norm must be >= 0");
  if (feature_norm == 0.0) return ClippedScalarLoss(base, y, 0.0, clip_norm, -kInf, kInf);
  const double level = clip_norm / feature_norm;
  if (level >= base.lipschitz_scalar) return ClippedScalarLoss(base, y, feature_norm, clip_norm, -kInf, kInf);
  const double y1 = detail::lower_threshold(base, y, level);
  const double y2 = detail::upper_threshold(base, y, level);
  if (!(y1 <= y2)) throw NumericError("huberize: threshold search produced a crossed bracket");
  return ClippedScalarLoss(base, y, feature_norm, clip_norm, y1, y2);
}

// Closed-form thresholds where they are known (logistic, absolute); anything
// else falls back to the generic search.
inline ClippedScalarLoss huberize(const ScalarLossFamily& base, double y, double feature_norm, double clip_norm) {
  if (!base.convex) throw UnsupportedLossError("huberize: base loss must be convex");
  if (!(clip_norm > 0.0)) throw ParamError("huberize: clip norm must be positive");
  if (feature_norm < 0.0) throw ParamError("huberize: feature norm must be >= 0");
  if (feature_norm == 0.0) return ClippedScalarLoss(base, y, 0.0, clip_norm, -kInf, kInf);
  const double level = clip_norm / feature_norm;
  if (base.name == "logistic" && (y == 1.0 || y == -1.0)) {
    // derivative of log(1+e^{-yz}) is -y/(1+e^{yz}) with |l'| < 1.
    if (level >= 1.0) return ClippedScalarLoss(base, y, feature_norm, clip_norm, -kInf, kInf);
    const double cross = std::log(1.0 / level - 1.0);
    if (y > 0.0) return ClippedScalarLoss(base, y, feature_norm, clip_norm, cross, kInf);
    return ClippedScalarLoss(base, y, feature_norm, clip_norm, -kInf, -cross);
  }
  if (base.name == "absolute") {
    if (level >= 1.0) return ClippedScalarLoss(base, y, feature_norm, clip_norm, -kInf, kInf);
    return ClippedScalarLoss(base, y, feature_norm, clip_norm, y, y);
  }
  return huberize_generic(base, y, feature_norm, clip_norm);
}

// Average of the per-example huberized losses; the objective a clipped run
// actually minimizes. Convex in theta whenever the base is.
inline double clipped_objective(const ScalarLossFamily& loss, const GlmDataset& data, const ModelVector& theta,
                                double clip_norm) {
  check_model_dims(data, theta);
  if (!std::isfinite(clip_norm)) return objective_value(loss, data, theta);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const ClippedScalarLoss g = huberize(loss, data.y(i), data.row_norm(i), clip_norm);
    acc += g.value(data.x(i).dot(theta));
  }
  const double out = acc / static_cast<double>(data.n());
  if (!std::isfinite(out)) throw NumericError("clipped_objective: non-finite result");
  return out;
}

// Averaged selected subgradient of the clipped objective.
inline ModelVector clipped_objective_gradient(const ScalarLossFamily& loss, const GlmDataset& data,
                                              const ModelVector& theta, double clip_norm) {
  check_model_dims(data, theta);
  if (!std::isfinite(clip_norm)) return full_subgradient(loss, data, theta);
  ModelVector g = ModelVector::Zero(data.dim());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const ClippedScalarLoss h = huberize(loss, data.y(i), data.row_norm(i), clip_norm);
    const double c = select_subgradient(h.subgradient(data.x(i).dot(theta)));
    g += c * data.x(i).transpose();
  }
  return g / static_cast<double>(data.n());
}

// Huberized losses packaged back as a ScalarLossFamily. Only valid when all
// feature rows share the same norm (the thresholds depend on it); callers
// with mixed norms must huberize per example.
inline ScalarLossFamily huberized_family(const ScalarLossFamily& base, double feature_norm, double clip_norm) {
  if (!base.convex) throw UnsupportedLossError("huberized_family: base loss must be convex");
  ScalarLossFamily f;
  f.name = base.name + "_huberized";
  f.value = [base, feature_norm, clip_norm](double z, double y) {
    return huberize(base, y, feature_norm, clip_norm).value(z);
  };
  f.subgradient = [base, feature_norm, clip_norm](double z, double y) {
    return huberize(base, y, feature_norm, clip_norm).subgradient(z);
  };
  f.lipschitz_scalar =
      feature_norm > 0.0 ? std::min(base.lipschitz_scalar, clip_norm / feature_norm) : base.lipschitz_scalar;
  f.smoothness_bound = base.smoothness_bound;
  f.convex = true;
  f.labels = base.labels;
  return f;
}

}  // namespace dpglm
