#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "dpglm/errors.hpp"

namespace dpglm {

// splitmix64 step; used to derive child seeds from (master, path) so that
// parallel runs get decorrelated streams without coordinating.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t v : path) s = splitmix64(s ^ (v + 0x9e3779b97f4a7c15ULL));
  return s;
}

// Seeded random stream with hand-rolled samplers. std::*_distribution is
// implementation-defined, so every sampler here is built from raw engine
// output to keep runs byte-reproducible (determinism is part of the run
// record contract).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() { return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the paired value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Laplace(0, scale) by inverse CDF.
  double laplace(double scale) {
    const double u = uniform() - 0.5;
    const double s = (u < 0.0) ? -1.0 : 1.0;
    return -scale * s * std::log1p(-2.0 * std::abs(u));
  }

  // Gamma(shape, scale) via Marsaglia-Tsang squeeze; shape < 1 handled by the
  // usual boosting identity G(a) = G(a+1) * U^(1/a), which stays accurate for
  // tiny shapes (the Beta(1/80,1/80) use case).
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0)) throw ParamError("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
    }
  }

  // Beta(a, b) from two Gamma draws.
  double beta(double a, double b) {
    const double ga = gamma(a, 1.0);
    const double gb = gamma(b, 1.0);
    return ga / (ga + gb);
  }

  Eigen::VectorXd gaussian_vector(int p, double sd) {
    Eigen::VectorXd v(p);
    for (int i = 0; i < p; ++i) v[i] = sd * normal();
    return v;
  }

  // Uniformly random direction on the unit sphere.
  Eigen::VectorXd uniform_direction(int p) {
    Eigen::VectorXd v(p);
    double nrm = 0.0;
    do {
      for (int i = 0; i < p; ++i) v[i] = normal();
      nrm = v.norm();
    } while (nrm == 0.0);
    return v / nrm;
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dpglm
