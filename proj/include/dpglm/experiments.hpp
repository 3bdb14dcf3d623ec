#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dpglm/accountant.hpp"
#include "dpglm/data_io.hpp"
#include "dpglm/losses.hpp"
#include "dpglm/optimizer.hpp"
#include "dpglm/rng.hpp"
#include "dpglm/subspace.hpp"

namespace dpglm {

using Json = nlohmann::ordered_json;

namespace detail {

inline void check_keys(const Json& obj, const std::vector<std::string>& allowed, const std::string& context) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + context);
  }
}

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace detail

// Bounded worker pool over a fixed job list; job order in memory is fixed up
// front so results are independent of scheduling.
inline void run_jobs(std::vector<std::function<void()>>& jobs, int threads) {
  if (jobs.empty()) return;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const int nthreads = std::max(1, std::min<int>(threads > 0 ? threads : static_cast<int>(hw),
                                                 static_cast<int>(jobs.size())));
  if (nthreads == 1) {
    for (auto& j : jobs) j();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        jobs[i]();
      }
    });
  }
  for (auto& th : pool) th.join();
}

inline std::vector<double> default_lr_grid() {
  return {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0};
}

inline std::vector<long> default_pad_grid() {
  return {9, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000};
}

inline std::vector<long> full_pad_grid() {
  std::vector<long> pads = {9};
  for (int i = 1; i <= 4; ++i)
    for (long m : {1, 2, 5}) {
      const long v = m * static_cast<long>(std::pow(10.0, i));
      if (v != 10) pads.push_back(v);
    }
  std::sort(pads.begin(), pads.end());
  return pads;
}

// Noise multiplier z such that T subsampled-Gaussian steps at rate q meet the
// (eps, delta) target under the classic RDP -> DP conversion. Monotone in z,
// so plain bisection.
inline double calibrate_gaussian_noise_multiplier(double q, long steps, double delta, double target_eps) {
  const auto eps_of = [&](double z) {
    PrivacyLedger ledger;
    ledger.add_subsampled_gaussian_steps(q, z, steps);
    return ledger_to_dp(ledger, delta).eps;
  };
  double lo = 1e-2, hi = 1.0;
  while (eps_of(hi) > target_eps) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e4) throw NumericError("calibrate_gaussian_noise_multiplier: no solution below z = 1e4");
  }
  while (eps_of(lo) < target_eps && lo > 1e-6) lo /= 2.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (eps_of(mid) > target_eps ? lo : hi) = mid;
  }
  return hi;  // the safe side: eps(hi) <= target
}

// Per-step pure-DP level eps0 such that the amplified, RDP-composed release
// meets (eps, delta).
inline double calibrate_gamma_eps0(double q, long steps, double delta, double target_eps) {
  const auto eps_of = [&](double eps0) {
    PrivacyLedger ledger;
    ledger.add_pure_steps(gamma_step_epsilon(eps0, q), steps);
    return ledger_to_dp(ledger, delta).eps;
  };
  double lo = 1e-4, hi = 1.0;
  while (eps_of(hi) < target_eps) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e3) throw NumericError("calibrate_gamma_eps0: no solution below eps0 = 1e3");
  }
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (eps_of(mid) < target_eps ? lo : hi) = mid;
  }
  return lo;  // the safe side: eps(lo) <= target
}

// ---------------------------------------------------------------------------
// Dimension sweep (padded-feature benchmark)
// ---------------------------------------------------------------------------

struct DatasetSource {
  std::string kind = "synthetic";  // "synthetic" | "file"
  long n_train = 2500;
  long n_test = 1500;
  long raw_dim = 8;
  double signal_scale = 3.0;
  std::string train_path;
  std::string test_path;
};

struct ExperimentConfig {
  DatasetSource dataset;
  std::vector<long> pads = {9, 100, 1000, 10000};
  std::string loss = "logistic";
  int epochs = 10;
  int batch_size = 125;
  double clip_norm = kInf;
  std::vector<std::string> noise_kinds = {"gaussian", "gamma"};
  double epsilon = 5.0;
  double delta = 1e-5;
  std::vector<double> lr_grid = default_lr_grid();
  int repeats = 3;
  std::uint64_t master_seed = 1;
  std::string out_dir = "out";
  int threads = 0;
  bool emit_traces = false;
};

inline ExperimentConfig parse_experiment_config(const Json& j) {
  detail::check_keys(j, {"dataset", "pads", "loss", "epochs", "batch_size", "clip_norm", "noise", "epsilon", "delta",
                         "lr_grid", "repeats", "seed", "out_dir", "threads", "emit_traces"},
                     "experiment config");
  ExperimentConfig cfg;
  if (j.contains("dataset")) {
    const Json& d = j.at("dataset");
    detail::check_keys(d, {"kind", "n_train", "n_test", "raw_dim", "signal_scale", "train_path", "test_path"},
                       "dataset");
    if (d.contains("kind")) cfg.dataset.kind = d.at("kind").get<std::string>();
    if (d.contains("n_train")) cfg.dataset.n_train = d.at("n_train").get<long>();
    if (d.contains("n_test")) cfg.dataset.n_test = d.at("n_test").get<long>();
    if (d.contains("raw_dim")) cfg.dataset.raw_dim = d.at("raw_dim").get<long>();
    if (d.contains("signal_scale")) cfg.dataset.signal_scale = d.at("signal_scale").get<double>();
    if (d.contains("train_path")) cfg.dataset.train_path = d.at("train_path").get<std::string>();
    if (d.contains("test_path")) cfg.dataset.test_path = d.at("test_path").get<std::string>();
    if (cfg.dataset.kind != "synthetic" && cfg.dataset.kind != "file")
      throw ConfigError("dataset.kind must be 'synthetic' or 'file'");
  }
  if (j.contains("pads")) {
    // either an explicit list or one of the named grids
    if (j.at("pads").is_string()) {
      const std::string name = j.at("pads").get<std::string>();
      if (name == "full")
        cfg.pads = full_pad_grid();
      else if (name == "default")
        cfg.pads = default_pad_grid();
      else
        throw ConfigError("pads must be a list of dimensions, \"default\", or \"full\"");
    } else {
      cfg.pads = j.at("pads").get<std::vector<long>>();
    }
  }
  if (j.contains("loss")) cfg.loss = j.at("loss").get<std::string>();
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
  if (j.contains("clip_norm") && !j.at("clip_norm").is_null()) cfg.clip_norm = j.at("clip_norm").get<double>();
  if (j.contains("noise")) cfg.noise_kinds = j.at("noise").get<std::vector<std::string>>();
  if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
  if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
  if (j.contains("lr_grid")) cfg.lr_grid = j.at("lr_grid").get<std::vector<double>>();
  if (j.contains("repeats")) cfg.repeats = j.at("repeats").get<int>();
  if (j.contains("seed")) cfg.master_seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  if (j.contains("emit_traces")) cfg.emit_traces = j.at("emit_traces").get<bool>();
  if (cfg.lr_grid.empty()) throw ConfigError("lr_grid must be nonempty");
  if (cfg.repeats < 1) throw ConfigError("repeats must be >= 1");
  if (!is_known_loss_name(cfg.loss)) throw ConfigError("unknown loss '" + cfg.loss + "'");
  std::sort(cfg.lr_grid.begin(), cfg.lr_grid.end());  // tie-break prefers smaller rates
  for (const auto& k : cfg.noise_kinds) {
    if (k != "gaussian" && k != "gamma" && k != "none") throw ConfigError("unknown noise kind '" + k + "'");
  }
  return cfg;
}

struct SweepRow {
  long dimension = 0;
  std::string noise_kind;
  double lr = 0.0;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  double stderr_acc = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::string status = "ok";
};

struct SweepResult {
  std::vector<SweepRow> rows;
  long steps = 0;
  double q = 0.0;
  double noise_multiplier = 0.0;  // calibrated Gaussian z
  double gamma_eps0 = 0.0;        // calibrated per-step pure eps
};

namespace detail {

inline std::uint64_t noise_kind_id(const std::string& kind) {
  if (kind == "none") return 0;
  if (kind == "gaussian") return 1;
  if (kind == "gamma") return 2;
  throw ConfigError("unknown noise kind '" + kind + "'");
}

struct SingleRunOutcome {
  double metric_acc = 0.0;  // averaged test accuracy over the last 5 epochs
  bool ok = false;
  std::string error;
  OptimizerRun run;  // epoch-end iterates only (log stride = steps per epoch)
};

// One DP-SGD run; the reported metric averages the test accuracy over the
// last five epoch-end iterates, matching the tuning rule.
inline SingleRunOutcome run_one(const GlmDataset& train, const GlmDataset& test, const ScalarLossFamily& loss,
                                const ExperimentConfig& cfg, const std::string& noise_kind, double lr, long steps,
                                long steps_per_epoch, double gauss_sigma_avg, double gamma_eps0,
                                std::uint64_t seed) {
  SingleRunOutcome out;
  try {
    OptimizerConfig ocfg;
    ocfg.iterations = static_cast<int>(steps);
    ocfg.learning_rate = lr;
    ocfg.clip_norm = cfg.clip_norm;
    ocfg.batch = BatchSpec::poisson(static_cast<double>(cfg.batch_size) / static_cast<double>(train.n()));
    ocfg.output = OutputKind::LastIterate;
    ocfg.seed = seed;
    ocfg.log_stride = static_cast<int>(steps_per_epoch);
    NoiseSpec noise = NoiseSpec::none();
    if (noise_kind == "gaussian") noise = NoiseSpec::gaussian(gauss_sigma_avg);
    if (noise_kind == "gamma") noise = NoiseSpec::gamma(gamma_eps0);
    out.run = dpgd_run(train, loss, ocfg, noise);

    const int epochs = cfg.epochs;
    const int last = std::min(5, epochs);
    double acc_sum = 0.0;
    int counted = 0;
    for (int e = epochs - last + 1; e <= epochs; ++e) {
      const long want = e * steps_per_epoch;
      for (std::size_t i = 0; i < out.run.iterate_steps.size(); ++i) {
        if (out.run.iterate_steps[i] == want) {
          acc_sum += binary_accuracy(test, out.run.iterates[i]);
          ++counted;
          break;
        }
      }
    }
    if (counted == 0) throw NumericError("run_one: no epoch-end iterates logged");
    out.metric_acc = acc_sum / counted;
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

// One row per logged iterate: step index, norm, and (for small models) the
// coordinates themselves.
inline void write_iterate_trace_csv(const OptimizerRun& run, const std::string& path) {
  CsvWriter csv(path);
  const Eigen::Index p = run.final_model.size();
  const bool coords = p <= 16;
  std::vector<std::string> header = {"step", "theta_norm"};
  if (!run.objective_trace.empty()) header.push_back("objective");
  if (coords)
    for (Eigen::Index j = 0; j < p; ++j) header.push_back("theta" + std::to_string(j + 1));
  csv.row(header);
  for (std::size_t i = 0; i < run.iterates.size(); ++i) {
    std::vector<std::string> row = {std::to_string(run.iterate_steps[i]), format_float(run.iterates[i].norm())};
    if (!run.objective_trace.empty()) row.push_back(format_float(run.objective_trace[i]));
    if (coords)
      for (Eigen::Index j = 0; j < p; ++j) row.push_back(format_float(run.iterates[i][j]));
    csv.row(row);
  }
}

// Learning-rate sweep + repeats across pad dimensions and noise kinds.
// Writes sweep.csv (RFC 4180), sweep_plot.tsv + sweep_plot.gp, and
// runs.jsonl under cfg.out_dir; also returns the rows.
inline SweepResult run_dimension_sweep(const ExperimentConfig& cfg) {
  const ScalarLossFamily loss = loss_by_name(cfg.loss);

  auto [train, test, stats] = [&]() {
    if (cfg.dataset.kind == "file") {
      return preprocess(load_sparse_dataset(cfg.dataset.train_path), load_sparse_dataset(cfg.dataset.test_path));
    }
    const SyntheticRawSplits raw =
        synthetic_raw_binary(cfg.dataset.n_train, cfg.dataset.n_test, cfg.dataset.raw_dim, cfg.dataset.signal_scale,
                             derive_seed(cfg.master_seed, {0xda7a}));
    return preprocess(raw.train, raw.test);
  }();

  const long n = train.n();
  const double q = static_cast<double>(cfg.batch_size) / static_cast<double>(n);
  if (!(q > 0.0 && q < 0.5)) throw ConfigError("batch_size must give a sampling rate in (0, 0.5)");
  const long steps_per_epoch = std::max<long>(1, std::llround(1.0 / q));
  const long steps = static_cast<long>(cfg.epochs) * steps_per_epoch;

  // Per-example gradient bound after preprocessing (row norms <= 1).
  const double per_example_bound =
      std::isfinite(cfg.clip_norm) ? std::min(cfg.clip_norm, loss.lipschitz_scalar) : loss.lipschitz_scalar;
  const double sensitivity_avg = per_example_bound / (q * static_cast<double>(n));

  double z = 0.0, sigma_avg = 0.0, gamma_eps0 = 0.0, eps_gauss = 0.0, eps_gamma = 0.0;
  const bool wants_gauss = std::find(cfg.noise_kinds.begin(), cfg.noise_kinds.end(), "gaussian") != cfg.noise_kinds.end();
  const bool wants_gamma = std::find(cfg.noise_kinds.begin(), cfg.noise_kinds.end(), "gamma") != cfg.noise_kinds.end();
  if (wants_gauss) {
    z = calibrate_gaussian_noise_multiplier(q, steps, cfg.delta, cfg.epsilon);
    sigma_avg = z * per_example_bound / (q * static_cast<double>(n));
    PrivacyLedger ledger;
    ledger.add_subsampled_gaussian_steps(q, z, steps);
    eps_gauss = ledger_to_dp(ledger, cfg.delta).eps;
  }
  if (wants_gamma) {
    gamma_eps0 = calibrate_gamma_eps0(q, steps, cfg.delta, cfg.epsilon);
    PrivacyLedger ledger;
    ledger.add_pure_steps(gamma_step_epsilon(gamma_eps0, q), steps);
    eps_gamma = ledger_to_dp(ledger, cfg.delta).eps;
  }

  SweepResult result;
  result.steps = steps;
  result.q = q;
  result.noise_multiplier = z;
  result.gamma_eps0 = gamma_eps0;

  const auto out_path = detail::ensure_dir(cfg.out_dir);
  std::ofstream runs_jsonl(out_path / "runs.jsonl");

  for (long pad : cfg.pads) {
    if (pad < train.dim())
      throw ConfigError("pad dimension " + std::to_string(pad) + " below data dimensionality " +
                        std::to_string(train.dim()));
    const GlmDataset train_p = pad_dimensions(train, pad);
    const GlmDataset test_p = pad_dimensions(test, pad);
    const FeatureSubspace subspace = feature_projector(train_p);

    for (const std::string& kind : cfg.noise_kinds) {
      // 1) learning-rate sweep, one run per grid point. Seeds deliberately do
      // not depend on the pad dimension: a padded run differs from its
      // unpadded twin only through the extra noise coordinates, so the
      // noiseless arm is exactly padding-invariant.
      std::vector<detail::SingleRunOutcome> sweep_out(cfg.lr_grid.size());
      {
        std::vector<std::function<void()>> jobs;
        for (std::size_t li = 0; li < cfg.lr_grid.size(); ++li) {
          jobs.push_back([&, li]() {
            const std::uint64_t seed = derive_seed(cfg.master_seed, {0x5eed, detail::noise_kind_id(kind), li});
            sweep_out[li] = detail::run_one(train_p, test_p, loss, cfg, kind, cfg.lr_grid[li], steps,
                                            steps_per_epoch, sigma_avg, gamma_eps0, seed);
          });
        }
        run_jobs(jobs, cfg.threads);
      }
      // deterministic selection; smaller learning rate wins ties
      double best_lr = cfg.lr_grid.front();
      double best_acc = -1.0;
      bool any_ok = false;
      for (std::size_t li = 0; li < cfg.lr_grid.size(); ++li) {
        if (!sweep_out[li].ok) continue;
        any_ok = true;
        if (sweep_out[li].metric_acc > best_acc + 1e-12) {
          best_acc = sweep_out[li].metric_acc;
          best_lr = cfg.lr_grid[li];
        }
      }

      SweepRow row;
      row.dimension = pad;
      row.noise_kind = kind;
      row.delta = cfg.delta;
      row.eps = kind == "gaussian" ? eps_gauss : (kind == "gamma" ? eps_gamma : kInf);
      const std::uint64_t row_seed = derive_seed(cfg.master_seed, {0xbe57, detail::noise_kind_id(kind)});
      row.seed = row_seed;
      if (!any_ok) {
        row.status = "error: all sweep runs failed (" + sweep_out.front().error + ")";
        result.rows.push_back(row);
        continue;
      }
      row.lr = best_lr;

      // 2) repeats at the chosen rate
      std::vector<detail::SingleRunOutcome> rep_out(cfg.repeats);
      {
        std::vector<std::function<void()>> jobs;
        for (int rep = 0; rep < cfg.repeats; ++rep) {
          jobs.push_back([&, rep]() {
            const std::uint64_t seed = derive_seed(row_seed, {static_cast<std::uint64_t>(rep)});
            rep_out[rep] =
                detail::run_one(train_p, test_p, loss, cfg, kind, best_lr, steps, steps_per_epoch, sigma_avg,
                                gamma_eps0, seed);
          });
        }
        run_jobs(jobs, cfg.threads);
      }
      std::vector<double> accs;
      std::string rep_error;
      const detail::SingleRunOutcome* first_ok = nullptr;
      for (const auto& r : rep_out) {
        if (r.ok) {
          accs.push_back(r.metric_acc);
          if (!first_ok) first_ok = &r;
        } else {
          rep_error = r.error;
        }
      }
      if (accs.empty()) {
        row.status = "error: all repeats failed (" + rep_error + ")";
      } else {
        row.mean_acc = detail::mean_of(accs);
        row.std_acc = detail::std_of(accs);
        row.stderr_acc = row.std_acc / std::sqrt(static_cast<double>(accs.size()));
        if (!rep_error.empty()) row.status = "partial: " + rep_error;
      }
      result.rows.push_back(row);

      Json rec;
      rec["dimension"] = pad;
      rec["noise_kind"] = kind;
      rec["lr"] = sig9(row.lr);
      rec["mean_acc"] = sig9(row.mean_acc);
      rec["std_acc"] = sig9(row.std_acc);
      rec["stderr_acc"] = sig9(row.stderr_acc);
      rec["eps"] = std::isfinite(row.eps) ? Json(sig9(row.eps)) : Json(nullptr);
      rec["delta"] = sig9(row.delta);
      rec["seed"] = row.seed;
      rec["steps"] = steps;
      rec["q"] = sig9(q);
      rec["batch_denominator"] = sig9(q * static_cast<double>(n));
      rec["sensitivity"] = sig9(sensitivity_avg);
      rec["status"] = row.status;
      if (first_ok) {
        // feature-span diagnostics of the first successful repeat
        const ModelVector grad = full_subgradient(loss, train_p, first_ok->run.final_model);
        rec["rank"] = subspace.rank;
        rec["grad_seminorm"] = sig9(seminorm(grad, subspace));
        rec["grad_residual"] = sig9((grad - project(grad, subspace)).norm());
        if (cfg.emit_traces) {
          const auto trace_dir = detail::ensure_dir((out_path / "traces").string());
          write_iterate_trace_csv(first_ok->run,
                                  (trace_dir / ("pad" + std::to_string(pad) + "_" + kind + ".csv")).string());
        }
      }
      runs_jsonl << rec.dump() << "\n";
    }
  }

  // stable output order
  std::sort(result.rows.begin(), result.rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.dimension != b.dimension) return a.dimension < b.dimension;
    return a.noise_kind < b.noise_kind;
  });

  CsvWriter csv((out_path / "sweep.csv").string());
  csv.row({"dimension", "noise_kind", "lr", "mean_acc", "std_acc", "stderr_acc", "eps", "delta", "seed", "status"});
  for (const auto& r : result.rows) {
    csv.row({std::to_string(r.dimension), r.noise_kind, format_float(r.lr), format_float(r.mean_acc),
             format_float(r.std_acc), format_float(r.stderr_acc), format_float(r.eps), format_float(r.delta),
             std::to_string(r.seed), r.status});
  }

  // tab-separated plot data + a gnuplot script; no plotting dependency
  {
    std::ofstream tsv(out_path / "sweep_plot.tsv");
    tsv << "dimension";
    std::vector<std::string> kinds = cfg.noise_kinds;
    for (const auto& k : kinds) tsv << "\t" << k << "_acc\t" << k << "_std";
    tsv << "\n";
    for (long pad : cfg.pads) {
      tsv << pad;
      for (const auto& k : kinds) {
        const auto it = std::find_if(result.rows.begin(), result.rows.end(), [&](const SweepRow& r) {
          return r.dimension == pad && r.noise_kind == k;
        });
        if (it != result.rows.end())
          tsv << "\t" << format_float(it->mean_acc) << "\t" << format_float(it->std_acc);
        else
          tsv << "\tnan\tnan";
      }
      tsv << "\n";
    }
    std::ofstream gp(out_path / "sweep_plot.gp");
    gp << "set logscale x\n"
       << "set xlabel 'data dimensionality'\n"
       << "set ylabel 'test accuracy'\n"
       << "set key bottom left\n"
       << "plot ";
    for (std::size_t i = 0; i < cfg.noise_kinds.size(); ++i) {
      if (i) gp << ", ";
      gp << "'sweep_plot.tsv' using 1:" << 2 + 2 * i << ":" << 3 + 2 * i << " with yerrorlines title '"
         << cfg.noise_kinds[i] << "'";
    }
    gp << "\n";
  }
  return result;
}

// ---------------------------------------------------------------------------
// Rank / dimension scaling of the excess empirical risk
// ---------------------------------------------------------------------------

struct RankScalingConfig {
  long n = 2000;
  int rank_fixed = 5;
  std::vector<long> p_values = {10, 100, 1000};
  std::vector<int> rank_values = {2, 8, 32};
  long p_fixed = 1000;
  double epsilon = 0.7;
  double delta = 1e-5;
  int iterations = 400;
  double learning_rate = 2.0;
  int noiseless_iterations = 6000;
  double noiseless_learning_rate = 4.0;
  int seeds = 10;
  double signal_scale = 3.0;
  bool include_noiseless = true;
  std::uint64_t master_seed = 1;
  std::string out_dir = "out_rank";
  int threads = 0;
};

inline RankScalingConfig parse_rank_scaling_config(const Json& j) {
  detail::check_keys(j, {"n", "rank", "p_values", "rank_values", "p_fixed", "epsilon", "delta", "iterations",
                         "learning_rate", "noiseless_iterations", "noiseless_learning_rate", "seeds", "signal_scale",
                         "include_noiseless", "seed", "out_dir", "threads"},
                     "rank scaling config");
  RankScalingConfig cfg;
  if (j.contains("n")) cfg.n = j.at("n").get<long>();
  if (j.contains("rank")) cfg.rank_fixed = j.at("rank").get<int>();
  if (j.contains("p_values")) cfg.p_values = j.at("p_values").get<std::vector<long>>();
  if (j.contains("rank_values")) cfg.rank_values = j.at("rank_values").get<std::vector<int>>();
  if (j.contains("p_fixed")) cfg.p_fixed = j.at("p_fixed").get<long>();
  if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
  if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
  if (j.contains("iterations")) cfg.iterations = j.at("iterations").get<int>();
  if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("noiseless_iterations")) cfg.noiseless_iterations = j.at("noiseless_iterations").get<int>();
  if (j.contains("noiseless_learning_rate")) cfg.noiseless_learning_rate = j.at("noiseless_learning_rate").get<double>();
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<int>();
  if (j.contains("signal_scale")) cfg.signal_scale = j.at("signal_scale").get<double>();
  if (j.contains("include_noiseless")) cfg.include_noiseless = j.at("include_noiseless").get<bool>();
  if (j.contains("seed")) cfg.master_seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  return cfg;
}

struct RankScalingRow {
  long p = 0;
  int rank = 0;
  std::string arm;  // dpgd-gaussian | exact-gd
  int seed_index = -1;
  double excess = 0.0;
  double oracle_objective = 0.0;
  double grad_seminorm = 0.0;  // of the final model, in the feature span
  double grad_residual = 0.0;  // component outside the span
  double eps = 0.0;
  double delta = 0.0;
  std::string status = "ok";
};

namespace detail {

// Minimum of the objective over the feature span, solved in latent
// coordinates by a long noiseless descent. Exact for rank-structured data
// because the loss only sees <theta, x>.
inline double latent_oracle_minimum(const SyntheticGlm& inst, const ScalarLossFamily& loss) {
  FeatureMatrix latent = inst.latent;
  GlmDataset reduced(std::move(latent), inst.data.responses(), 1.0);
  OptimizerConfig cfg;
  cfg.iterations = 50000;
  cfg.learning_rate = 4.0;
  cfg.output = OutputKind::LastIterate;
  cfg.log_stride = 0;
  const OptimizerRun run = dpgd_run(reduced, loss, cfg, NoiseSpec::none());
  return objective_value(loss, reduced, run.final_model);
}

}  // namespace detail

// Excess empirical risk of full-batch DP gradient descent against a
// converged non-private oracle, across ambient dimension at fixed rank and
// across rank at fixed dimension. Writes rank_scaling.csv.
inline std::vector<RankScalingRow> run_rank_scaling(const RankScalingConfig& cfg) {
  const ScalarLossFamily loss = logistic_loss();
  std::vector<std::pair<long, int>> cells;
  for (long p : cfg.p_values) cells.emplace_back(p, cfg.rank_fixed);
  for (int r : cfg.rank_values) cells.emplace_back(cfg.p_fixed, r);
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

  std::vector<RankScalingRow> rows;
  for (const auto& [p, r] : cells) {
    // seed depends on the rank only: across ambient dimensions the latent
    // problem is identical, so the p-axis isolates the dimension effect
    const std::uint64_t data_seed = derive_seed(cfg.master_seed, {0xdada, static_cast<std::uint64_t>(r)});
    const SyntheticGlm inst = synthetic_rank_r_logistic(cfg.n, p, r, cfg.signal_scale, data_seed);
    const FeatureSubspace subspace = feature_projector(inst.data);
    const double oracle = detail::latent_oracle_minimum(inst, loss);
    const double sigma = gaussian_sigma_for_budget(1.0, cfg.iterations, cfg.n, cfg.epsilon, cfg.delta);

    std::vector<RankScalingRow> cell_rows(cfg.seeds + (cfg.include_noiseless ? 1 : 0));
    std::vector<std::function<void()>> jobs;
    for (int s = 0; s < cfg.seeds; ++s) {
      jobs.push_back([&, p = p, r = r, s]() {
        RankScalingRow row;
        row.p = p;
        row.rank = r;
        row.arm = "dpgd-gaussian";
        row.seed_index = s;
        row.oracle_objective = oracle;
        row.eps = cfg.epsilon;
        row.delta = cfg.delta;
        try {
          OptimizerConfig ocfg;
          ocfg.iterations = cfg.iterations;
          ocfg.learning_rate = cfg.learning_rate;
          ocfg.output = OutputKind::AverageIterate;
          ocfg.log_stride = 0;
          ocfg.seed = derive_seed(cfg.master_seed, {0x5eed, static_cast<std::uint64_t>(p),
                                                    static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(s)});
          const OptimizerRun run = dpgd_run(inst.data, loss, ocfg, NoiseSpec::gaussian(sigma));
          row.excess = objective_value(loss, inst.data, run.final_model) - oracle;
          const ModelVector grad = full_subgradient(loss, inst.data, run.final_model);
          row.grad_seminorm = seminorm(grad, subspace);
          row.grad_residual = (grad - project(grad, subspace)).norm();
        } catch (const std::exception& e) {
          row.status = std::string("error: ") + e.what();
        }
        cell_rows[s] = row;
      });
    }
    if (cfg.include_noiseless) {
      jobs.push_back([&, p = p, r = r]() {
        RankScalingRow row;
        row.p = p;
        row.rank = r;
        row.arm = "exact-gd";
        row.oracle_objective = oracle;
        row.eps = kInf;
        row.delta = 0.0;
        try {
          OptimizerConfig ocfg;
          ocfg.iterations = cfg.noiseless_iterations;
          ocfg.learning_rate = cfg.noiseless_learning_rate;
          ocfg.output = OutputKind::LastIterate;
          ocfg.log_stride = 0;
          const OptimizerRun run = dpgd_run(inst.data, loss, ocfg, NoiseSpec::none());
          row.excess = objective_value(loss, inst.data, run.final_model) - oracle;
          const ModelVector grad = full_subgradient(loss, inst.data, run.final_model);
          row.grad_seminorm = seminorm(grad, subspace);
          row.grad_residual = (grad - project(grad, subspace)).norm();
        } catch (const std::exception& e) {
          row.status = std::string("error: ") + e.what();
        }
        cell_rows[cfg.seeds] = row;
      });
    }
    run_jobs(jobs, cfg.threads);
    rows.insert(rows.end(), cell_rows.begin(), cell_rows.end());
  }

  const auto out_path = detail::ensure_dir(cfg.out_dir);
  CsvWriter csv((out_path / "rank_scaling.csv").string());
  csv.row({"p", "rank", "arm", "seed_index", "excess", "oracle_objective", "grad_seminorm", "grad_residual", "eps",
           "delta", "status"});
  for (const auto& row : rows) {
    csv.row({std::to_string(row.p), std::to_string(row.rank), row.arm, std::to_string(row.seed_index),
             format_float(row.excess), format_float(row.oracle_objective), format_float(row.grad_seminorm),
             format_float(row.grad_residual), format_float(row.eps), format_float(row.delta), row.status});
  }
  return rows;
}

// Run-record JSON used by the CLI and the sweep's runs.jsonl.
inline Json run_record_json(const OptimizerRun& run, const std::optional<DpResult>& dp, double delta) {
  Json j;
  j["config"] = {{"iterations", run.config.iterations},
                 {"learning_rate", sig9(run.config.learning_rate)},
                 {"clip_norm", std::isfinite(run.config.clip_norm) ? Json(sig9(run.config.clip_norm)) : Json(nullptr)},
                 {"projection_radius",
                  std::isfinite(run.config.projection_radius) ? Json(sig9(run.config.projection_radius)) : Json(nullptr)},
                 {"seed", run.seed_used},
                 {"batch_denominator", sig9(run.batch_denominator)}};
  switch (run.noise.kind) {
    case NoiseKind::None:
      j["noise"] = {{"kind", "none"}};
      break;
    case NoiseKind::Gaussian:
      j["noise"] = {{"kind", "gaussian"}, {"sigma", sig9(run.noise.sigma)}, {"ldp_scale", run.noise.ldp_scale}};
      break;
    case NoiseKind::Gamma:
      j["noise"] = {{"kind", "gamma"},
                    {"eps0", sig9(run.noise.epsilon0)},
                    {"sensitivity", sig9(run.noise_sensitivity)}};
      break;
  }
  if (dp) {
    j["privacy"] = {{"eps", sig9(dp->eps)}, {"delta", sig9(delta)}, {"best_alpha", sig9(dp->best_alpha)}};
  }
  j["final_model_norm"] = sig9(run.final_model.norm());
  j["steps_logged"] = run.iterates.size();
  return j;
}

}  // namespace dpglm
