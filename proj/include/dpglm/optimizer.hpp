#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "dpglm/clipping.hpp"
#include "dpglm/core.hpp"
#include "dpglm/errors.hpp"
#include "dpglm/rng.hpp"
#include "dpglm/subspace.hpp"

namespace dpglm {

enum class NoiseKind { None, Gaussian, Gamma };

// Gaussian sigma is the per-coordinate standard deviation added to the
// averaged (clipped) gradient. Gamma epsilon0 is the per-step pure-DP level;
// the run scales the draw by the averaged-gradient sensitivity internally so
// that the stated level actually holds.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::None;
  double sigma = 0.0;
  double epsilon0 = 0.0;
  bool ldp_scale = false;  // multiply Gaussian noise by sqrt(n) (local model)

  static NoiseSpec none() { return {}; }
  static NoiseSpec gaussian(double sigma, bool ldp_scale = false) {
    NoiseSpec s;
    s.kind = NoiseKind::Gaussian;
    s.sigma = sigma;
    s.ldp_scale = ldp_scale;
    return s;
  }
  static NoiseSpec gamma(double epsilon0) {
    NoiseSpec s;
    s.kind = NoiseKind::Gamma;
    s.epsilon0 = epsilon0;
    return s;
  }
};

// One draw of the additive noise vector at unit sensitivity: Gaussian is iid
// N(0, sigma^2) per coordinate; Gamma is a uniform direction with magnitude
// Gamma(shape=p, scale=1/eps0).
inline ModelVector sample_noise(const NoiseSpec& spec, int p, RngStream& rng, long n = 1) {
  if (p < 1) throw ParamError("sample_noise: p must be >= 1");
  switch (spec.kind) {
    case NoiseKind::None:
      return ModelVector::Zero(p);
    case NoiseKind::Gaussian: {
      if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) throw ParamError("sample_noise: sigma must be finite and >= 0");
      double sd = spec.sigma;
      if (spec.ldp_scale) sd *= std::sqrt(static_cast<double>(n));
      return rng.gaussian_vector(p, sd);
    }
    case NoiseKind::Gamma: {
      if (!(spec.epsilon0 > 0.0) || !std::isfinite(spec.epsilon0)) throw ParamError("sample_noise: eps0 must be finite and positive");
      const ModelVector dir = rng.uniform_direction(p);
      const double mag = rng.gamma(static_cast<double>(p), 1.0 / spec.epsilon0);
      return mag * dir;
    }
  }
  throw ParamError("sample_noise: unknown noise kind");
}

enum class BatchKind { Full, Poisson, Fixed };
enum class OutputKind { AverageIterate, LastIterate };

struct BatchSpec {
  BatchKind kind = BatchKind::Full;
  double q = 0.0;  // Poisson inclusion probability
  int m = 0;       // fixed batch size

  static BatchSpec full() { return {}; }
  static BatchSpec poisson(double q) { return {BatchKind::Poisson, q, 0}; }
  static BatchSpec fixed(int m) { return {BatchKind::Fixed, 0.0, m}; }
};

struct OptimizerConfig {
  int iterations = 1;
  double learning_rate = 0.1;
  double clip_norm = kInf;  // infinity disables clipping
  BatchSpec batch = BatchSpec::full();
  OutputKind output = OutputKind::AverageIterate;
  double projection_radius = kInf;  // l2 ball, infinity = unconstrained
  std::uint64_t seed = 0;
  int log_stride = 1;              // 0 disables the iterate log
  bool record_objective = false;   // objective trace costs a full pass per step
};

struct OptimizerRun {
  OptimizerConfig config;
  NoiseSpec noise;
  ModelVector final_model;
  std::vector<ModelVector> iterates;   // theta_t at logged steps
  std::vector<int> iterate_steps;      // t for each logged iterate
  std::vector<double> noisy_grad_norms;  // ||g_t + b_t|| per step
  std::vector<double> objective_trace;   // objective at each logged iterate
  std::uint64_t seed_used = 0;
  double batch_denominator = 0.0;
  double noise_sensitivity = 0.0;  // averaged-gradient sensitivity used for Gamma scaling
};

constexpr double kDivergenceGuard = 1e12;

namespace detail {

inline void validate_optimizer_config(const GlmDataset& data, const ScalarLossFamily& loss,
                                      const OptimizerConfig& cfg, const NoiseSpec& noise) {
  if (cfg.iterations < 1) throw ParamError("optimizer: iterations must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ParamError("optimizer: learning rate must be positive");
  if (!(cfg.clip_norm > 0.0)) throw ParamError("optimizer: clip norm must be positive");
  if (!(cfg.projection_radius > 0.0)) throw ParamError("optimizer: projection radius must be positive");
  if (cfg.log_stride < 0) throw ParamError("optimizer: log stride must be >= 0");
  switch (cfg.batch.kind) {
    case BatchKind::Full:
      break;
    case BatchKind::Poisson:
      if (!(cfg.batch.q > 0.0 && cfg.batch.q < 1.0)) throw ParamError("optimizer: Poisson q must lie in (0,1)");
      break;
    case BatchKind::Fixed:
      if (cfg.batch.m < 1 || cfg.batch.m > data.n()) throw ParamError("optimizer: fixed batch size out of range");
      break;
  }
  if (noise.kind != NoiseKind::None && !std::isfinite(cfg.clip_norm)) {
    if (!(loss.lipschitz_scalar > 0.0) || !std::isfinite(loss.lipschitz_scalar) || !data.feature_norm_cap())
      throw ConfigError(
          "optimizer: DP noise without clipping needs a finite loss Lipschitz bound and a dataset feature_norm_cap "
          "(sensitivity is unbounded otherwise)");
  }
  validate_label_encoding(loss, data);
}

}  // namespace detail

// Noisy (possibly clipped, possibly subsampled) gradient descent from
// theta_0 = 0. Deterministic given the seed. With kind=none and a full batch
// this is exact subgradient descent.
inline OptimizerRun dpgd_run(const GlmDataset& data, const ScalarLossFamily& loss, const OptimizerConfig& cfg,
                             const NoiseSpec& noise) {
  detail::validate_optimizer_config(data, loss, cfg, noise);
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.dim();
  const int t_max = cfg.iterations;
  RngStream rng(cfg.seed);

  double denom = static_cast<double>(n);
  if (cfg.batch.kind == BatchKind::Poisson) denom = cfg.batch.q * static_cast<double>(n);
  if (cfg.batch.kind == BatchKind::Fixed) denom = static_cast<double>(cfg.batch.m);

  // Sensitivity of the averaged gradient under add/remove of one example;
  // used to scale Gamma noise so that eps0 per step actually holds.
  double per_example_bound = std::isfinite(cfg.clip_norm) ? cfg.clip_norm : kInf;
  if (data.feature_norm_cap() && std::isfinite(loss.lipschitz_scalar))
    per_example_bound = std::min(per_example_bound, loss.lipschitz_scalar * *data.feature_norm_cap());
  const double sensitivity = per_example_bound / denom;
  if (noise.kind == NoiseKind::Gamma && !std::isfinite(sensitivity))
    throw ConfigError("optimizer: Gamma noise needs a finite per-example gradient bound");

  OptimizerRun run;
  run.config = cfg;
  run.noise = noise;
  run.seed_used = cfg.seed;
  run.batch_denominator = denom;
  run.noise_sensitivity = noise.kind == NoiseKind::Gamma ? sensitivity : 0.0;

  ModelVector theta = ModelVector::Zero(p);
  ModelVector iterate_sum = ModelVector::Zero(p);
  const bool log_on = cfg.log_stride > 0;
  auto maybe_log = [&](int t) {
    if (!log_on) return;
    if (t % cfg.log_stride == 0 || t == t_max) {
      run.iterates.push_back(theta);
      run.iterate_steps.push_back(t);
      if (cfg.record_objective) run.objective_trace.push_back(objective_value(loss, data, theta));
    }
  };
  maybe_log(0);

  std::vector<Eigen::Index> batch;
  batch.reserve(n);
  std::vector<Eigen::Index> pool(n);
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});

  for (int t = 0; t < t_max; ++t) {
    batch.clear();
    switch (cfg.batch.kind) {
      case BatchKind::Full:
        batch.assign(pool.begin(), pool.end());
        break;
      case BatchKind::Poisson:
        for (Eigen::Index i = 0; i < n; ++i) {
          if (rng.uniform() < cfg.batch.q) batch.push_back(i);
        }
        break;
      case BatchKind::Fixed: {
        // partial Fisher-Yates over a scratch pool
        for (int k = 0; k < cfg.batch.m; ++k) {
          const Eigen::Index j = k + static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n - k));
          std::swap(pool[k], pool[std::min(j, n - 1)]);
          batch.push_back(pool[k]);
        }
        break;
      }
    }

    ModelVector g = ModelVector::Zero(p);
    for (Eigen::Index i : batch) {
      const double z = data.x(i).dot(theta);
      double c = select_subgradient(loss.subgradient(z, data.y(i)));
      if (std::isfinite(cfg.clip_norm)) {
        const double gnorm = std::abs(c) * data.row_norm(i);
        if (gnorm > cfg.clip_norm) c *= cfg.clip_norm / gnorm;
      }
      g.noalias() += c * data.x(i).transpose();
    }
    g /= denom;

    if (noise.kind != NoiseKind::None) {
      ModelVector b = sample_noise(noise, static_cast<int>(p), rng, n);
      if (noise.kind == NoiseKind::Gamma) b *= sensitivity;
      g += b;
    }
    run.noisy_grad_norms.push_back(g.norm());

    theta -= cfg.learning_rate * g;
    if (std::isfinite(cfg.projection_radius)) {
      const double nrm = theta.norm();
      if (nrm > cfg.projection_radius) theta *= cfg.projection_radius / nrm;
    }
    if (!theta.allFinite() || theta.norm() > kDivergenceGuard)
      throw DivergenceError("optimizer: iterate diverged at step " + std::to_string(t + 1), t + 1);

    iterate_sum += theta;
    maybe_log(t + 1);
  }

  if (cfg.output == OutputKind::AverageIterate) {
    run.final_model = iterate_sum / static_cast<double>(t_max);
  } else {
    run.final_model = theta;
  }
  return run;
}

// Lap(4L/n) at unit budget; the per-release budget eps divides the scale.
inline double fosp_laplace_scale(double lipschitz, long n, double eps) {
  if (!(lipschitz > 0.0) || n < 1 || !(eps > 0.0)) throw ParamError("fosp_laplace_scale: bad arguments");
  if (std::isinf(eps)) return 0.0;
  return 4.0 * lipschitz / (static_cast<double>(n) * eps);
}

// Report-noisy-max over the logged iterates: argmin over t in {0..T-1} of
// seminorm(grad L(theta_t), M) + Lap(4 L / (n eps)). eps = +inf forces the
// Laplace scale to zero (exact argmin).
inline int select_fosp(const OptimizerRun& run, const GlmDataset& data, const ScalarLossFamily& loss,
                       const FeatureSubspace& m, double lipschitz, double eps, RngStream& rng) {
  if (run.iterates.empty()) throw ParamError("select_fosp: iterate log is empty");
  if (run.config.log_stride != 1)
    throw ConfigError("select_fosp: run must retain every iterate (log_stride == 1)");
  if (!(lipschitz > 0.0) || !(eps > 0.0)) throw ParamError("select_fosp: L and eps must be positive");
  const int t_count = run.config.iterations;  // candidates t = 0..T-1
  if (static_cast<int>(run.iterates.size()) < t_count) throw ParamError("select_fosp: incomplete iterate log");
  const double scale = fosp_laplace_scale(lipschitz, data.n(), eps);
  int best_t = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (int t = 0; t < t_count; ++t) {
    const ModelVector g = full_subgradient(loss, data, run.iterates[t]);
    double score = seminorm(g, m);
    if (scale > 0.0) score += rng.laplace(scale);
    if (score < best_score) {
      best_score = score;
      best_t = t;
    }
  }
  return best_t;
}

// Gradient-oracle variant of the same loop, for callers that substitute the
// per-example losses (e.g. running the unclipped descent on huberized
// losses). The oracle maps (theta, batch indices) to the averaged gradient
// before noise; batching and noise draws consume the RNG exactly as in
// dpgd_run, so equal seeds give comparable runs.
inline OptimizerRun dpgd_run_with_oracle(
    const GlmDataset& data, const OptimizerConfig& cfg, const NoiseSpec& noise,
    const std::function<ModelVector(const ModelVector&, const std::vector<Eigen::Index>&, double)>& averaged_gradient) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.dim();
  if (cfg.iterations < 1) throw ParamError("optimizer: iterations must be >= 1");
  RngStream rng(cfg.seed);

  double denom = static_cast<double>(n);
  if (cfg.batch.kind == BatchKind::Poisson) denom = cfg.batch.q * static_cast<double>(n);
  if (cfg.batch.kind == BatchKind::Fixed) denom = static_cast<double>(cfg.batch.m);

  OptimizerRun run;
  run.config = cfg;
  run.noise = noise;
  run.seed_used = cfg.seed;
  run.batch_denominator = denom;

  ModelVector theta = ModelVector::Zero(p);
  ModelVector iterate_sum = ModelVector::Zero(p);
  const bool log_on = cfg.log_stride > 0;
  auto maybe_log = [&](int t) {
    if (!log_on) return;
    if (t % cfg.log_stride == 0 || t == cfg.iterations) {
      run.iterates.push_back(theta);
      run.iterate_steps.push_back(t);
    }
  };
  maybe_log(0);

  std::vector<Eigen::Index> batch;
  std::vector<Eigen::Index> pool(n);
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});

  for (int t = 0; t < cfg.iterations; ++t) {
    batch.clear();
    switch (cfg.batch.kind) {
      case BatchKind::Full:
        batch.assign(pool.begin(), pool.end());
        break;
      case BatchKind::Poisson:
        for (Eigen::Index i = 0; i < n; ++i) {
          if (rng.uniform() < cfg.batch.q) batch.push_back(i);
        }
        break;
      case BatchKind::Fixed:
        for (int k = 0; k < cfg.batch.m; ++k) {
          const Eigen::Index j = k + static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n - k));
          std::swap(pool[k], pool[std::min(j, n - 1)]);
          batch.push_back(pool[k]);
        }
        break;
    }
    ModelVector g = averaged_gradient(theta, batch, denom);
    if (noise.kind != NoiseKind::None) g += sample_noise(noise, static_cast<int>(p), rng, n);
    run.noisy_grad_norms.push_back(g.norm());
    theta -= cfg.learning_rate * g;
    if (std::isfinite(cfg.projection_radius)) {
      const double nrm = theta.norm();
      if (nrm > cfg.projection_radius) theta *= cfg.projection_radius / nrm;
    }
    if (!theta.allFinite() || theta.norm() > kDivergenceGuard)
      throw DivergenceError("optimizer: iterate diverged at step " + std::to_string(t + 1), t + 1);
    iterate_sum += theta;
    maybe_log(t + 1);
  }
  run.final_model = cfg.output == OutputKind::AverageIterate ? ModelVector(iterate_sum / cfg.iterations) : theta;
  return run;
}

}  // namespace dpglm
