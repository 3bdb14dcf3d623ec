#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "dpglm/core.hpp"
#include "dpglm/errors.hpp"

namespace dpglm {

// Orthonormal basis of span{x_i}; the projector is M = basis * basis^T but is
// never materialized (O(p*r) storage matters once the data is padded).
struct FeatureSubspace {
  Eigen::MatrixXd basis;  // p x r, orthonormal columns
  int rank = 0;
  double tolerance = 0.0;
};

constexpr double kDefaultRankTol = 1e-10;

// Rank-revealing orthogonal factorization of the feature span.
//
// Stage 1 runs pivoted modified Gram-Schmidt over the rows (cost O(n*p*r)),
// keeping a deliberately loose cut so no near-tolerance direction is lost.
// Stage 2 takes the SVD of X restricted to that candidate basis (an n x r'
// problem) and drops singular directions with sigma_j <= rel_tol * sigma_max.
inline FeatureSubspace feature_projector(const GlmDataset& data, double rel_tol = kDefaultRankTol) {
  if (!(rel_tol > 0.0) || rel_tol > 1e-3) throw ParamError("feature_projector: rel_tol must lie in (0, 1e-3]");
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.dim();
  const FeatureMatrix& rows = data.features();

  Eigen::VectorXd residual_sq = rows.rowwise().squaredNorm();
  const double max_norm = std::sqrt(residual_sq.maxCoeff());
  FeatureSubspace out;
  out.tolerance = rel_tol;
  if (max_norm == 0.0) {
    out.basis = Eigen::MatrixXd::Zero(p, 0);
    out.rank = 0;
    return out;
  }

  // Keep candidates down to well below the requested tolerance; stage 2 does
  // the actual cut on singular values. The candidate matrix grows
  // geometrically: ranks stay tiny compared to min(n, p) for padded data.
  const double stage1_cut = max_norm * rel_tol * 1e-3;
  const Eigen::Index max_rank = std::min(n, p);
  Eigen::MatrixXd cand(p, std::min<Eigen::Index>(16, max_rank));
  Eigen::Index r = 0;
  while (r < max_rank) {
    Eigen::Index pivot;
    const double best = residual_sq.maxCoeff(&pivot);
    if (!(std::sqrt(std::max(best, 0.0)) > stage1_cut)) break;
    Eigen::VectorXd v = rows.row(pivot).transpose();
    // Re-orthogonalize twice; plain MGS drifts for ill-conditioned inputs.
    for (int pass = 0; pass < 2; ++pass) {
      if (r > 0) v -= cand.leftCols(r) * (cand.leftCols(r).transpose() * v);
    }
    const double nrm = v.norm();
    if (!(nrm > stage1_cut)) {
      residual_sq[pivot] = 0.0;
      continue;
    }
    if (r == cand.cols()) cand.conservativeResize(Eigen::NoChange, std::min(2 * r, max_rank));
    cand.col(r) = v / nrm;
    // Downdate all residual norms against the new direction.
    Eigen::VectorXd proj = rows * cand.col(r);
    residual_sq -= proj.cwiseProduct(proj);
    residual_sq = residual_sq.cwiseMax(0.0);
    ++r;
  }

  if (r == 0) {
    out.basis = Eigen::MatrixXd::Zero(p, 0);
    out.rank = 0;
    return out;
  }

  // Singular values of X on the candidate subspace.
  Eigen::MatrixXd c = rows * cand.leftCols(r);  // n x r
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  int keep = 0;
  for (Eigen::Index j = 0; j < sv.size(); ++j) {
    if (sv[j] > rel_tol * smax) ++keep;
  }
  out.basis = cand.leftCols(r) * svd.matrixV().leftCols(keep);
  out.rank = keep;
  return out;
}

// ||M v||_2 = ||basis^T v||_2
inline double seminorm(const ModelVector& v, const FeatureSubspace& m) {
  if (v.size() != m.basis.rows()) throw ShapeError("seminorm: dimension mismatch");
  if (m.rank == 0) return 0.0;
  return (m.basis.transpose() * v).norm();
}

// M v = basis (basis^T v); idempotent.
inline ModelVector project(const ModelVector& v, const FeatureSubspace& m) {
  if (v.size() != m.basis.rows()) throw ShapeError("project: dimension mismatch");
  if (m.rank == 0) return ModelVector::Zero(v.size());
  return m.basis * (m.basis.transpose() * v);
}

}  // namespace dpglm
