#pragma once

#include <Eigen/Core>
#include <cmath>
#include <utility>
#include <vector>

#include "dpglm/clipping.hpp"
#include "dpglm/core.hpp"
#include "dpglm/errors.hpp"
#include "dpglm/losses.hpp"
#include "dpglm/rng.hpp"

namespace dpglm {

// Hard instance for private mean / ERM estimation: rows are zero or a
// standard basis vector, responses are inner products with hidden binary
// rows whose per-coordinate means come from a Beta(beta, beta) prior.
struct FingerprintInstance {
  GlmDataset dataset;
  Eigen::VectorXd hidden_means;             // p_j in [0,1]
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> hidden_rows;  // n x d in {0,1}
  double alpha = 1.0;
  double beta = 1.0 / 80.0;
};

inline FingerprintInstance fingerprint_dataset(int d, long n, double alpha, double beta, std::uint64_t seed) {
  if (d < 1 || n < 1) throw ParamError("fingerprint_dataset: need d >= 1 and n >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ParamError("fingerprint_dataset: alpha must lie in (0,1]; alpha = 0 is the degenerate all-zero case");
  if (!(beta > 0.0)) throw ParamError("fingerprint_dataset: beta must be positive");
  RngStream rng(seed);

  Eigen::VectorXd means(d);
  for (int j = 0; j < d; ++j) means[j] = rng.beta(beta, beta);

  Eigen::MatrixXd z(n, d);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) z(i, j) = rng.uniform() < means[j] ? 1.0 : 0.0;

  FeatureMatrix x = FeatureMatrix::Zero(n, d);
  Eigen::VectorXd y(n);
  for (long i = 0; i < n; ++i) {
    if (rng.uniform() < alpha) {
      const int j = std::min<int>(static_cast<int>(rng.uniform() * d), d - 1);
      x(i, j) = 1.0;
      y[i] = z(i, j);
    } else {
      y[i] = 0.0;
    }
  }
  return FingerprintInstance{GlmDataset(std::move(x), std::move(y), 1.0), std::move(means), std::move(z), alpha, beta};
}

// Exact minimizer of the absolute-loss objective on a fingerprint instance:
// the features decouple the coordinates, so theta_j is any median of the
// responses hitting coordinate j (ties resolved to 1/2, the interval center).
inline ModelVector fingerprint_exact_minimizer(const FingerprintInstance& inst) {
  const Eigen::Index n = inst.dataset.n();
  const Eigen::Index d = inst.dataset.dim();
  ModelVector theta = ModelVector::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    long hits = 0, ones = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (inst.dataset.features()(i, j) == 1.0) {
        ++hits;
        if (inst.dataset.y(i) == 1.0) ++ones;
      }
    }
    if (hits == 0) continue;
    if (2 * ones > hits)
      theta[j] = 1.0;
    else if (2 * ones == hits)
      theta[j] = 0.5;
  }
  return theta;
}

// {(1/2, +1)}^{2u} u {(1, -1)}^{u}: one-dimensional logistic instance whose
// clipped optimum moves to 2 log(1/B - 1) while the true optimum stays at 0.
inline GlmDataset clipping_bias_instance(long n_unit) {
  if (n_unit < 1) throw ParamError("clipping_bias_instance: n_unit must be >= 1");
  const long n = 3 * n_unit;
  FeatureMatrix x(n, 1);
  Eigen::VectorXd y(n);
  for (long i = 0; i < 2 * n_unit; ++i) {
    x(i, 0) = 0.5;
    y[i] = 1.0;
  }
  for (long i = 2 * n_unit; i < n; ++i) {
    x(i, 0) = 1.0;
    y[i] = -1.0;
  }
  return GlmDataset(std::move(x), std::move(y), 1.0);
}

// Stationary point of the clipped logistic objective on the bias instance.
inline double theta_clipped_star_closed_form(double clip_norm) {
  if (!(clip_norm > 0.0 && clip_norm < 0.5))
    throw ParamError("theta_clipped_star_closed_form: requires 0 < B < 1/2");
  return 2.0 * std::log(1.0 / clip_norm - 1.0);
}

enum class ClipMode { Joint, PerClass };

// Clipped softmax gradient field at a point (the vectors DP descent would
// average). Joint mode clips the stacked gradient; per-class mode clips each
// block independently.
inline std::vector<ModelVector> clipped_gradient_field(const std::vector<ModelVector>& point,
                                                       const SoftmaxExample& ex, double clip_norm, ClipMode mode) {
  auto [loss, grads] = softmax_loss_and_gradient(point, ex);
  (void)loss;
  if (mode == ClipMode::PerClass) return per_class_clip(grads, clip_norm);
  const double nrm = softmax_gradient_norm(grads);
  if (nrm > clip_norm) {
    const double f = clip_norm / nrm;
    for (auto& g : grads) g *= f;
  }
  return grads;
}

namespace detail {

// Which clip constraints are active; finite differences must not straddle a
// change in this pattern.
inline std::vector<int> clip_activation_pattern(const std::vector<ModelVector>& point, const SoftmaxExample& ex,
                                                double clip_norm, ClipMode mode) {
  auto [loss, grads] = softmax_loss_and_gradient(point, ex);
  (void)loss;
  std::vector<int> pattern;
  if (mode == ClipMode::Joint) {
    pattern.push_back(softmax_gradient_norm(grads) > clip_norm ? 1 : 0);
  } else {
    for (const auto& g : grads) pattern.push_back(g.norm() > clip_norm ? 1 : 0);
  }
  return pattern;
}

}  // namespace detail

// Central-difference Jacobian of the clipped gradient field, stacked as a
// (K p) x (K p) matrix in block order. Throws BoundaryError if any probe
// crosses a clipping activation boundary.
inline Eigen::MatrixXd field_jacobian_fd(const std::vector<ModelVector>& point, const SoftmaxExample& ex,
                                         double clip_norm, ClipMode mode, double h) {
  if (!(h >= 1e-7 && h <= 1e-4)) throw ParamError("field_jacobian_fd: h must lie in [1e-7, 1e-4]");
  if (point.size() < 3) throw ParamError("field_jacobian_fd: need K >= 3");
  if (!(ex.x.norm() > 0.0)) throw ParamError("field_jacobian_fd: feature vector must be nonzero");
  const int k_classes = static_cast<int>(point.size());
  const Eigen::Index p = ex.x.size();
  const auto base_pattern = detail::clip_activation_pattern(point, ex, clip_norm, mode);

  const auto stack = [&](const std::vector<ModelVector>& blocks) {
    Eigen::VectorXd v(k_classes * p);
    for (int k = 0; k < k_classes; ++k) v.segment(k * p, p) = blocks[k];
    return v;
  };

  Eigen::MatrixXd jac(k_classes * p, k_classes * p);
  std::vector<ModelVector> probe = point;
  for (int k = 0; k < k_classes; ++k) {
    for (Eigen::Index i = 0; i < p; ++i) {
      const double orig = probe[k][i];
      probe[k][i] = orig + h;
      if (detail::clip_activation_pattern(probe, ex, clip_norm, mode) != base_pattern)
        throw BoundaryError("field_jacobian_fd: probe crossed a clipping activation boundary; offset the point");
      const Eigen::VectorXd gp = stack(clipped_gradient_field(probe, ex, clip_norm, mode));
      probe[k][i] = orig - h;
      if (detail::clip_activation_pattern(probe, ex, clip_norm, mode) != base_pattern)
        throw BoundaryError("field_jacobian_fd: probe crossed a clipping activation boundary; offset the point");
      const Eigen::VectorXd gm = stack(clipped_gradient_field(probe, ex, clip_norm, mode));
      probe[k][i] = orig;
      jac.col(k * p + i) = (gp - gm) / (2.0 * h);
    }
  }
  return jac;
}

// Relative asymmetry ||J - J^T||_F / max(1, ||J||_F) of the clipped field's
// Jacobian; a conservative gradient field scores ~0, an inconsistent one
// does not.
inline double field_asymmetry(const std::vector<ModelVector>& point, const SoftmaxExample& ex, double clip_norm,
                              ClipMode mode, double h = 1e-5) {
  const Eigen::MatrixXd j = field_jacobian_fd(point, ex, clip_norm, mode, h);
  const double denom = std::max(1.0, j.norm());
  return (j - j.transpose()).norm() / denom;
}

}  // namespace dpglm
