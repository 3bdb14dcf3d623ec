// dpglm: benchmark and diagnostics CLI for differentially private GLM
// optimization. Subcommands: account, bench, rank-sweep, gen, check.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dpglm/dpglm.hpp"

namespace {

using dpglm::Json;

int cmd_account(const std::string& mechanism, double q, double noise_multiplier, double eps0, long steps,
                double epochs, double delta) {
  if (steps <= 0) {
    if (epochs <= 0.0) throw dpglm::ParamError("account: provide --steps or --epochs");
    steps = static_cast<long>(std::ceil(epochs / q));
  }
  dpglm::PrivacyLedger ledger;
  if (mechanism == "gaussian") {
    if (!(noise_multiplier > 0.0)) throw dpglm::ParamError("account: gaussian mechanism needs --noise-multiplier");
    ledger.add_subsampled_gaussian_steps(q, noise_multiplier, steps);
  } else if (mechanism == "gamma") {
    if (!(eps0 > 0.0)) throw dpglm::ParamError("account: gamma mechanism needs --eps0");
    ledger.add_pure_steps(dpglm::gamma_step_epsilon(eps0, q), steps);
  } else {
    throw dpglm::ParamError("account: mechanism must be gaussian or gamma");
  }
  const dpglm::DpResult classic = dpglm::ledger_to_dp(ledger, delta);
  const dpglm::DpResult improved = dpglm::ledger_to_dp_improved(ledger, delta);
  Json out;
  out["eps"] = dpglm::sig9(classic.eps);
  out["best_alpha"] = dpglm::sig9(classic.best_alpha);
  out["eps_improved"] = dpglm::sig9(improved.eps);
  out["best_alpha_improved"] = dpglm::sig9(improved.best_alpha);
  out["delta"] = dpglm::sig9(delta);
  out["steps"] = steps;
  out["mechanism"] = mechanism;
  for (const auto& [k, v] : ledger.metadata()) out[k] = v;
  out["conversion"] = "eps: rdp + log(1/delta)/(alpha-1); eps_improved: Canonne-Kamath-Steinke";
  std::cout << out.dump(2) << "\n";
  return 0;
}

Json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dpglm::Error("cannot open config file '" + path + "'");
  Json j;
  in >> j;
  return j;
}

void write_dataset_csv(const dpglm::GlmDataset& data, const std::string& path) {
  dpglm::CsvWriter csv(path);
  std::vector<std::string> header = {"y"};
  for (Eigen::Index j = 0; j < data.dim(); ++j) header.push_back("x" + std::to_string(j + 1));
  csv.row(header);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    std::vector<std::string> row = {dpglm::format_float(data.y(i))};
    for (Eigen::Index j = 0; j < data.dim(); ++j) row.push_back(dpglm::format_float(data.features()(i, j)));
    csv.row(row);
  }
}

// The worked example used throughout the field checks: three classes in two
// dimensions with distinct class exponentials so the clipped field is
// genuinely asymmetric.
std::vector<dpglm::ModelVector> field_preset_point(int k_classes, Eigen::Index p) {
  std::vector<dpglm::ModelVector> point(k_classes, dpglm::ModelVector::Zero(p));
  const double margins[] = {0.0, 0.5, -0.3};
  for (int k = 0; k < k_classes; ++k) point[k][0] = k < 3 ? margins[k] : 0.1 * k;
  return point;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentially private GLM optimization benchmarks"};
  app.require_subcommand(1);

  // -- account ---------------------------------------------------------------
  auto* account = app.add_subcommand("account", "compose per-step privacy into a final (eps, delta)");
  std::string mechanism = "gaussian";
  double q = 0.0, noise_multiplier = 0.0, eps0 = 0.0, epochs = 0.0, delta = 1e-5;
  long steps = 0;
  account->add_option("--mechanism", mechanism, "gaussian | gamma")->required();
  account->add_option("--q", q, "Poisson sampling rate")->required();
  account->add_option("--noise-multiplier", noise_multiplier, "Gaussian noise multiplier");
  account->add_option("--eps0", eps0, "per-step pure-DP level of the Gamma mechanism");
  account->add_option("--steps", steps, "number of steps");
  account->add_option("--epochs", epochs, "epochs (steps = ceil(epochs / q))");
  account->add_option("--delta", delta, "target delta");

  // -- bench -----------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "dimension-padding benchmark sweep");
  std::string bench_config;
  bench->add_option("--config", bench_config, "JSON config file")->required();

  // -- rank-sweep --------------------------------------------------------------
  auto* rank = app.add_subcommand("rank-sweep", "excess-risk scaling across dimension and rank");
  std::string rank_config;
  rank->add_option("--config", rank_config, "JSON config file")->required();

  // -- gen ---------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate diagnostic datasets");
  auto* gen_fp = gen->add_subcommand("fingerprint", "basis-or-zero hard instance");
  int fp_d = 10;
  long fp_n = 1000;
  double fp_alpha = 1.0, fp_beta = 1.0 / 80.0;
  std::uint64_t fp_seed = 1;
  std::string fp_out = "fingerprint";
  gen_fp->add_option("--d", fp_d, "hidden dimension");
  gen_fp->add_option("--n", fp_n, "number of examples");
  gen_fp->add_option("--alpha", fp_alpha, "nonzero-feature probability in (0,1]");
  gen_fp->add_option("--beta", fp_beta, "Beta prior parameter");
  gen_fp->add_option("--seed", fp_seed, "generator seed");
  gen_fp->add_option("--out", fp_out, "output directory");

  auto* gen_cb = gen->add_subcommand("clipbias", "aggressive-clipping bias instance");
  long cb_units = 100;
  std::string cb_out = "clipbias";
  gen_cb->add_option("--n-unit", cb_units, "unit count (dataset has 3x this many rows)");
  gen_cb->add_option("--out", cb_out, "output directory");

  // -- check -------------------------------------------------------------------
  auto* check = app.add_subcommand("check", "diagnostic checks");
  auto* check_field = check->add_subcommand("field", "clipped-gradient-field conservativeness");
  int cf_k = 3;
  long cf_p = 2;
  double cf_b = 0.3, cf_h = 1e-5;
  std::string cf_mode = "joint";
  std::string cf_preset = "clipped";
  check_field->add_option("--k", cf_k, "number of classes (>= 3)");
  check_field->add_option("--p", cf_p, "feature dimension");
  check_field->add_option("--clip-norm", cf_b, "clip norm B");
  check_field->add_option("--fd-step", cf_h, "finite-difference step");
  check_field->add_option("--mode", cf_mode, "joint | per_class");
  check_field->add_option("--preset", cf_preset, "clipped | inactive");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*account) return cmd_account(mechanism, q, noise_multiplier, eps0, steps, epochs, delta);

    if (*bench) {
      const dpglm::ExperimentConfig cfg = dpglm::parse_experiment_config(load_config(bench_config));
      const dpglm::SweepResult result = dpglm::run_dimension_sweep(cfg);
      Json out;
      out["rows"] = result.rows.size();
      out["steps"] = result.steps;
      out["q"] = dpglm::sig9(result.q);
      if (result.noise_multiplier > 0.0) out["noise_multiplier"] = dpglm::sig9(result.noise_multiplier);
      if (result.gamma_eps0 > 0.0) out["gamma_eps0"] = dpglm::sig9(result.gamma_eps0);
      out["out_dir"] = cfg.out_dir;
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (*rank) {
      const dpglm::RankScalingConfig cfg = dpglm::parse_rank_scaling_config(load_config(rank_config));
      const auto rows = dpglm::run_rank_scaling(cfg);
      Json out;
      out["rows"] = rows.size();
      out["out_dir"] = cfg.out_dir;
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (*gen_fp) {
      const auto inst = dpglm::fingerprint_dataset(fp_d, fp_n, fp_alpha, fp_beta, fp_seed);
      std::filesystem::create_directories(fp_out);
      write_dataset_csv(inst.dataset, (std::filesystem::path(fp_out) / "dataset.csv").string());
      Json report;
      report["d"] = fp_d;
      report["n"] = fp_n;
      report["alpha"] = dpglm::sig9(fp_alpha);
      report["beta"] = dpglm::sig9(fp_beta);
      report["seed"] = fp_seed;
      Json means = Json::array();
      for (Eigen::Index j = 0; j < inst.hidden_means.size(); ++j) means.push_back(dpglm::sig9(inst.hidden_means[j]));
      report["hidden_means"] = means;
      std::ofstream((std::filesystem::path(fp_out) / "report.json")) << report.dump(2) << "\n";
      std::cout << report.dump(2) << "\n";
      return 0;
    }

    if (*gen_cb) {
      const auto data = dpglm::clipping_bias_instance(cb_units);
      std::filesystem::create_directories(cb_out);
      write_dataset_csv(data, (std::filesystem::path(cb_out) / "dataset.csv").string());
      Json report;
      report["n_unit"] = cb_units;
      report["rows"] = data.n();
      report["unclipped_optimum"] = 0.0;
      report["optimum_objective"] = dpglm::sig9(std::log(2.0));
      std::ofstream((std::filesystem::path(cb_out) / "report.json")) << report.dump(2) << "\n";
      std::cout << report.dump(2) << "\n";
      return 0;
    }

    if (*check_field) {
      if (cf_k < 3) throw dpglm::ParamError("check field: need --k >= 3");
      dpglm::SoftmaxExample ex;
      ex.x = dpglm::ModelVector::Zero(cf_p);
      ex.x[0] = 1.0;
      ex.y = 1;
      auto point = field_preset_point(cf_k, cf_p);
      double clip_norm = cf_b;
      if (cf_preset == "inactive") clip_norm = 2.0;  // above the softmax gradient norm ceiling
      const dpglm::ClipMode mode = cf_mode == "per_class" ? dpglm::ClipMode::PerClass : dpglm::ClipMode::Joint;
      const double asym = dpglm::field_asymmetry(point, ex, clip_norm, mode, cf_h);
      auto [loss_value, grads] = dpglm::softmax_loss_and_gradient(point, ex);
      Json out;
      out["mode"] = cf_mode;
      out["preset"] = cf_preset;
      out["clip_norm"] = dpglm::sig9(clip_norm);
      out["h"] = dpglm::sig9(cf_h);
      out["asymmetry"] = dpglm::sig9(asym);
      out["loss"] = dpglm::sig9(loss_value);
      out["grad_norm"] = dpglm::sig9(dpglm::softmax_gradient_norm(grads));
      Json norms = Json::array();
      for (const auto& g : grads) norms.push_back(dpglm::sig9(g.norm()));
      out["block_norms"] = norms;
      out["conservative"] = asym <= 1e-4;
      std::cout << out.dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
