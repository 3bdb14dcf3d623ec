#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "dpglm/errors.hpp"

namespace dpglm {

// sigma for the averaged-gradient Gaussian mechanism run for T full-batch
// steps: sigma = L * sqrt(2 T ln(1/delta)) / (n eps).
inline double gaussian_sigma_for_budget(double lipschitz, int iterations, long n, double eps, double delta) {
  if (!(lipschitz > 0.0) || iterations < 1 || n < 1) throw ParamError("gaussian_sigma_for_budget: bad arguments");
  if (!(eps > 0.0)) throw ParamError("gaussian_sigma_for_budget: eps must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ParamError("gaussian_sigma_for_budget: delta must lie in (0,1)");
  return lipschitz * std::sqrt(2.0 * static_cast<double>(iterations) * std::log(1.0 / delta)) /
         (static_cast<double>(n) * eps);
}

namespace detail {

inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

// log(e^a - e^b) for a >= b.
inline double log_sub(double a, double b) {
  if (b == -std::numeric_limits<double>::infinity()) return a;
  if (a <= b) return -std::numeric_limits<double>::infinity();
  const double d = a - b;
  if (d > 700.0) return a;
  return b + std::log(std::expm1(d));
}

// log(erfc(x)), using the asymptotic expansion once erfc underflows.
inline double log_erfc(double x) {
  if (x < 25.0) {
    const double v = std::erfc(x);
    if (v > 0.0) return std::log(v);
  }
  const double x2 = x * x;
  return -x2 - std::log(x) - 0.5 * std::log(M_PI) + std::log1p(-0.5 / x2 + 0.75 / (x2 * x2));
}

inline double log_binom_int(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

// Sampled-Gaussian-mechanism log(A_alpha) at integer order.
inline double sgm_log_a_int(double q, double z, int alpha) {
  double acc = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= alpha; ++k) {
    const double term = log_binom_int(alpha, k) + k * std::log(q) + (alpha - k) * std::log1p(-q) +
                        (static_cast<double>(k) * k - k) / (2.0 * z * z);
    acc = log_add(acc, term);
  }
  return acc;
}

// Sampled-Gaussian-mechanism log(A_alpha) at fractional order, via the
// erfc-damped series. Signed generalized binomial coefficients are tracked in
// log space.
inline double sgm_log_a_frac(double q, double z, double alpha) {
  const double inf = std::numeric_limits<double>::infinity();
  double log_a0 = -inf, log_a1 = -inf;
  const double z0 = z * z * std::log(1.0 / q - 1.0) + 0.5;
  double log_coef_abs = 0.0;  // log|binom(alpha, i)|, starts at i=0
  int sign = 1;
  for (int i = 0;; ++i) {
    if (i > 0) {
      const double factor = alpha - (i - 1);
      if (factor == 0.0) break;  // exact integer alpha; series ends
      log_coef_abs += std::log(std::abs(factor)) - std::log(static_cast<double>(i));
      if (factor < 0.0) sign = -sign;
    }
    const double j = alpha - i;
    const double log_t0 = log_coef_abs + i * std::log(q) + j * std::log1p(-q);
    const double log_t1 = log_coef_abs + j * std::log(q) + i * std::log1p(-q);
    const double log_e0 = std::log(0.5) + log_erfc((i - z0) / (std::sqrt(2.0) * z));
    const double log_e1 = std::log(0.5) + log_erfc((z0 - j) / (std::sqrt(2.0) * z));
    const double log_s0 = log_t0 + (static_cast<double>(i) * i - i) / (2.0 * z * z) + log_e0;
    const double log_s1 = log_t1 + (j * j - j) / (2.0 * z * z) + log_e1;
    if (sign > 0) {
      log_a0 = log_add(log_a0, log_s0);
      log_a1 = log_add(log_a1, log_s1);
    } else {
      log_a0 = log_sub(log_a0, log_s0);
      log_a1 = log_sub(log_a1, log_s1);
    }
    if (i >= 1 && std::max(log_s0, log_s1) < -40.0) break;
    if (i > 10000) throw UnsupportedOrderError("subsampled Gaussian RDP series did not converge");
  }
  return log_add(log_a0, log_a1);
}

}  // namespace detail

// Per-step RDP of the Poisson-subsampled Gaussian mechanism at order alpha
// (Mironov, Talwar, Zhang 2019: closed form at integer orders, the erfc
// series at fractional orders). q = 1 reduces to alpha / (2 z^2) exactly.
inline double rdp_subsampled_gaussian_step(double q, double noise_multiplier, double alpha) {
  if (!(q > 0.0) || q > 1.0) throw ParamError("rdp_subsampled_gaussian_step: q must lie in (0, 1]");
  if (!(noise_multiplier > 0.0)) throw ParamError("rdp_subsampled_gaussian_step: noise multiplier must be positive");
  if (!(alpha > 1.0)) throw UnsupportedOrderError("rdp_subsampled_gaussian_step: order must exceed 1");
  if (q == 1.0) return alpha / (2.0 * noise_multiplier * noise_multiplier);
  const double rounded = std::round(alpha);
  double log_a;
  if (std::abs(alpha - rounded) < 1e-9) {
    log_a = detail::sgm_log_a_int(q, noise_multiplier, static_cast<int>(rounded));
  } else {
    log_a = detail::sgm_log_a_frac(q, noise_multiplier, alpha);
  }
  double out = log_a / (alpha - 1.0);
  if (out < 0.0 && out > -1e-12) out = 0.0;  // rounding noise at tiny q
  if (!std::isfinite(out) || out < 0.0) throw UnsupportedOrderError("subsampled Gaussian RDP value invalid at this order");
  return out;
}

// Amplified per-step pure-DP level under Poisson subsampling at rate q.
inline double gamma_step_epsilon(double eps0, double q) {
  if (!(eps0 > 0.0)) throw ParamError("gamma_step_epsilon: eps0 must be positive");
  if (!(q > 0.0 && q < 0.5)) throw ParamError("gamma_step_epsilon: amplification bound requires q in (0, 0.5)");
  return std::log1p(q * std::expm1(eps0));
}

// eps-DP implies (alpha, alpha eps^2 / 2)-RDP at every order.
inline double pure_to_rdp(double eps, double alpha) {
  if (!(eps > 0.0)) throw ParamError("pure_to_rdp: eps must be positive");
  if (!(alpha > 1.0)) throw ParamError("pure_to_rdp: order must exceed 1");
  return alpha * eps * eps / 2.0;
}

// {1.25, 1.5, integers 2..64, 128, 256} plus a fine band [1.1, 12] at 0.1
// steps; covers the regime where the optimum sits around alpha 4-6.
inline std::vector<double> default_order_grid() {
  std::vector<double> g = {1.25, 1.5, 128.0, 256.0};
  for (int a = 2; a <= 64; ++a) g.push_back(static_cast<double>(a));
  for (int i = 0; i <= 109; ++i) g.push_back(1.1 + 0.1 * i);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), g.end());
  return g;
}

struct DpResult {
  double eps = 0.0;
  double best_alpha = 0.0;
};

enum class LedgerMode { Rdp, Pure };

// Accumulates per-step privacy over a grid of orders. Orders where the bound
// is invalid are dropped, never clamped.
class PrivacyLedger {
 public:
  explicit PrivacyLedger(LedgerMode mode = LedgerMode::Rdp, std::vector<double> orders = default_order_grid())
      : mode_(mode), orders_(std::move(orders)), values_(orders_.size(), 0.0), valid_(orders_.size(), true) {
    for (std::size_t i = 1; i < orders_.size(); ++i) {
      if (!(orders_[i] > orders_[i - 1])) throw ParamError("PrivacyLedger: order grid must be strictly increasing");
    }
    for (double a : orders_) {
      if (!(a > 1.0)) throw ParamError("PrivacyLedger: orders must exceed 1");
    }
  }

  LedgerMode mode() const { return mode_; }
  const std::vector<double>& orders() const { return orders_; }
  const std::vector<double>& rdp_values() const { return values_; }
  long steps() const { return steps_; }
  double pure_eps() const { return pure_eps_total_; }
  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  // T steps of the subsampled Gaussian mechanism.
  void add_subsampled_gaussian_steps(double q, double noise_multiplier, long steps) {
    if (mode_ != LedgerMode::Rdp) throw ConfigError("ledger is in pure-DP mode");
    if (steps < 1) throw ParamError("steps must be >= 1");
    for (std::size_t i = 0; i < orders_.size(); ++i) {
      if (!valid_[i]) continue;
      try {
        values_[i] += static_cast<double>(steps) * rdp_subsampled_gaussian_step(q, noise_multiplier, orders_[i]);
      } catch (const UnsupportedOrderError&) {
        valid_[i] = false;
      }
    }
    steps_ += steps;
    metadata_["rdp_bound"] = "sampled-gaussian-mechanism (Mironov-Talwar-Zhang 2019)";
  }

  // T steps of a mechanism with per-step pure-DP level eps_step, folded into
  // RDP via the (alpha, alpha eps^2/2) conversion.
  void add_pure_steps(double eps_step, long steps) {
    if (steps < 1) throw ParamError("steps must be >= 1");
    if (mode_ == LedgerMode::Pure) {
      pure_eps_total_ += eps_step * static_cast<double>(steps);
    } else {
      for (std::size_t i = 0; i < orders_.size(); ++i) {
        if (!valid_[i]) continue;
        values_[i] += static_cast<double>(steps) * pure_to_rdp(eps_step, orders_[i]);
      }
      metadata_["rdp_bound"] = "pure-DP to RDP (alpha eps^2 / 2)";
    }
    steps_ += steps;
  }

  bool empty() const { return steps_ == 0; }

 private:
  LedgerMode mode_;
  std::vector<double> orders_;
  std::vector<double> values_;
  std::vector<bool> valid_;
  long steps_ = 0;
  double pure_eps_total_ = 0.0;
  std::map<std::string, std::string> metadata_;

  friend DpResult ledger_to_dp(const PrivacyLedger&, double);
  friend DpResult ledger_to_dp_improved(const PrivacyLedger&, double);
};

// Classic RDP -> (eps, delta) conversion: min over orders of
// rdp(alpha) + ln(1/delta) / (alpha - 1).
inline DpResult ledger_to_dp(const PrivacyLedger& ledger, double delta) {
  if (ledger.empty()) throw ParamError("ledger_to_dp: ledger is empty");
  if (!(delta > 0.0 && delta < 1.0)) throw ParamError("ledger_to_dp: delta must lie in (0,1)");
  if (ledger.mode() == LedgerMode::Pure) return {ledger.pure_eps(), 0.0};
  DpResult best{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < ledger.orders_.size(); ++i) {
    if (!ledger.valid_[i]) continue;
    const double a = ledger.orders_[i];
    const double e = ledger.values_[i] + std::log(1.0 / delta) / (a - 1.0);
    if (e < best.eps) best = {e, a};
  }
  if (!std::isfinite(best.eps)) throw UnsupportedOrderError("ledger_to_dp: no valid order in the grid");
  return best;
}

// Tighter conversion (Canonne, Kamath, Steinke 2020):
// rdp(alpha) + log((alpha-1)/alpha) - (log delta + log alpha) / (alpha - 1).
// This is the variant that reproduces the sigma = 0.63 <-> eps ~ 5 pairing
// used to calibrate the Gaussian benchmark runs.
inline DpResult ledger_to_dp_improved(const PrivacyLedger& ledger, double delta) {
  if (ledger.empty()) throw ParamError("ledger_to_dp_improved: ledger is empty");
  if (!(delta > 0.0 && delta < 1.0)) throw ParamError("ledger_to_dp_improved: delta must lie in (0,1)");
  if (ledger.mode() == LedgerMode::Pure) return {ledger.pure_eps(), 0.0};
  DpResult best{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < ledger.orders_.size(); ++i) {
    if (!ledger.valid_[i]) continue;
    const double a = ledger.orders_[i];
    const double e =
        std::max(0.0, ledger.values_[i] + std::log1p(-1.0 / a) - (std::log(delta) + std::log(a)) / (a - 1.0));
    if (e < best.eps) best = {e, a};
  }
  if (!std::isfinite(best.eps)) throw UnsupportedOrderError("ledger_to_dp_improved: no valid order in the grid");
  return best;
}

}  // namespace dpglm
