#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dpglm/core.hpp"
#include "dpglm/errors.hpp"
#include "dpglm/rng.hpp"

namespace dpglm {

// All emitted floats go through this: 9 significant digits.
inline std::string format_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Round-trip a double through the 9-significant-digit representation, so
// values embedded in JSON match the CSV text exactly.
inline double sig9(double v) { return std::strtod(format_float(v).c_str(), nullptr); }

// RFC-4180 CSV writer: CRLF line endings, quoting only when needed.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot open '" + path + "' for writing");
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << escape(fields[i]);
    }
    out_ << "\r\n";
  }

 private:
  static std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += "\"\"";
      else q += c;
    }
    q += '"';
    return q;
  }
  std::ofstream out_;
};

// Resolves a dataset path: absolute and existing paths win, then
// DPGLM_DATA_DIR, then the working directory.
inline std::string resolve_data_path(const std::string& name) {
  namespace fs = std::filesystem;
  if (fs::exists(name)) return name;
  if (const char* dir = std::getenv("DPGLM_DATA_DIR")) {
    const fs::path candidate = fs::path(dir) / name;
    if (fs::exists(candidate)) return candidate.string();
  }
  return name;
}

// Sparse "label index:value ..." text format (1-based indices); missing
// indices densify to zero, the dimensionality is the global max index.
inline GlmDataset load_sparse_dataset(const std::string& path) {
  std::ifstream in(resolve_data_path(path));
  if (!in) throw Error("cannot open dataset file '" + path + "'");
  std::vector<double> labels;
  std::vector<std::vector<std::pair<long, double>>> rows;
  long max_index = 0;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank line
    char* end = nullptr;
    const double label = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw ParseError("bad label '" + tok + "'", line_no);
    std::vector<std::pair<long, double>> entries;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError("expected index:value, got '" + tok + "'", line_no);
      char* iend = nullptr;
      const long idx = std::strtol(tok.c_str(), &iend, 10);
      if (iend != tok.c_str() + colon || idx < 1) throw ParseError("bad feature index in '" + tok + "'", line_no);
      char* vend = nullptr;
      const double val = std::strtod(tok.c_str() + colon + 1, &vend);
      if (vend == tok.c_str() + colon + 1 || *vend != '\0' || !std::isfinite(val))
        throw ParseError("bad feature value in '" + tok + "'", line_no);
      entries.emplace_back(idx, val);
      max_index = std::max(max_index, idx);
    }
    labels.push_back(label);
    rows.push_back(std::move(entries));
  }
  if (labels.empty()) throw ParseError("dataset file '" + path + "' contains no examples", line_no);
  if (max_index == 0) throw ParseError("dataset file '" + path + "' has no features", line_no);
  FeatureMatrix x = FeatureMatrix::Zero(static_cast<Eigen::Index>(labels.size()), max_index);
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[static_cast<Eigen::Index>(i)] = labels[i];
    for (const auto& [idx, val] : rows[i]) x(static_cast<Eigen::Index>(i), idx - 1) = val;
  }
  return GlmDataset(std::move(x), std::move(y));
}

struct PreprocessStats {
  Eigen::VectorXd feature_min;
  Eigen::VectorXd feature_max;
  double ball_radius = 0.0;
  double const_feature = 0.0;
};

namespace detail {

inline FeatureMatrix apply_preprocess_rows(const FeatureMatrix& rows, const PreprocessStats& stats) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index p = rows.cols();
  FeatureMatrix out(n, p + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double span = stats.feature_max[j] - stats.feature_min[j];
      // features constant on train carry no information; map to 0
      out(i, j) = span > 0.0 ? (rows(i, j) - stats.feature_min[j]) / span - 0.5 : 0.0;
    }
    const double nrm = out.row(i).head(p).norm();
    if (nrm > stats.ball_radius) out.row(i).head(p) *= stats.ball_radius / nrm;
    out(i, p) = stats.const_feature;
  }
  return out;
}

}  // namespace detail

// Per-feature min/max scaling into [-0.5, 0.5] (stats fit on train only),
// projection onto the l2 ball of radius sqrt(p/(p+1)), then a constant
// feature 1/sqrt(p+1); every output row has norm at most 1 and p+1 columns.
// For 8 raw features this is ball radius sqrt(8/9) and constant 1/3.
inline std::tuple<GlmDataset, GlmDataset, PreprocessStats> preprocess(const GlmDataset& train,
                                                                      const GlmDataset& test) {
  if (train.dim() != test.dim()) throw ShapeError("preprocess: train/test dimensionality mismatch");
  const Eigen::Index p = train.dim();
  PreprocessStats stats;
  stats.feature_min = train.features().colwise().minCoeff();
  stats.feature_max = train.features().colwise().maxCoeff();
  stats.ball_radius = std::sqrt(static_cast<double>(p) / static_cast<double>(p + 1));
  stats.const_feature = 1.0 / std::sqrt(static_cast<double>(p + 1));
  GlmDataset train_out(detail::apply_preprocess_rows(train.features(), stats), train.responses(), 1.0);
  GlmDataset test_out(detail::apply_preprocess_rows(test.features(), stats), test.responses(), 1.0);
  return {std::move(train_out), std::move(test_out), std::move(stats)};
}

// Re-apply previously fitted stats (e.g. to a further split).
inline GlmDataset apply_preprocess(const GlmDataset& data, const PreprocessStats& stats) {
  if (data.dim() != stats.feature_min.size()) throw ShapeError("apply_preprocess: dimensionality mismatch");
  return GlmDataset(detail::apply_preprocess_rows(data.features(), stats), data.responses(), 1.0);
}

// Append zero columns up to target_p; norms, labels and the feature span are
// untouched.
inline GlmDataset pad_dimensions(const GlmDataset& data, Eigen::Index target_p) {
  if (target_p < data.dim()) throw ParamError("pad_dimensions: target dimensionality below current");
  if (target_p == data.dim()) return data;
  FeatureMatrix x = FeatureMatrix::Zero(data.n(), target_p);
  x.leftCols(data.dim()) = data.features();
  return GlmDataset(std::move(x), data.responses(), data.feature_norm_cap());
}

// Binary accuracy of sign(<theta, x>) against labels in {-1, +1}.
inline double binary_accuracy(const GlmDataset& data, const ModelVector& theta) {
  check_model_dims(data, theta);
  const Eigen::VectorXd z = data.features() * theta;
  long correct = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double pred = z[i] >= 0.0 ? 1.0 : -1.0;
    if (pred == data.y(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.n());
}

// Synthetic logistic data with features spanning a planted rank-r subspace
// of R^p. Labels are sampled from the logistic model at a planted parameter,
// so the instance is almost surely non-separable and the minimizer is
// interior. Returned alongside the latent (n x r) coordinates so oracles can
// solve the reduced problem exactly.
struct SyntheticGlm {
  GlmDataset data;
  Eigen::MatrixXd latent;     // n x r coordinates
  Eigen::MatrixXd embedding;  // p x r orthonormal columns
  ModelVector planted_latent; // r
};

inline SyntheticGlm synthetic_rank_r_logistic(long n, Eigen::Index p, int r, double signal_scale,
                                              std::uint64_t seed) {
  if (n < 1 || p < 1 || r < 1 || r > p) throw ParamError("synthetic_rank_r_logistic: bad shape");
  RngStream rng(seed);
  Eigen::MatrixXd latent(n, r);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < r; ++j) latent(i, j) = rng.normal();
  // rows scaled into the unit ball so the Lipschitz cap is 1
  for (long i = 0; i < n; ++i) {
    const double nrm = latent.row(i).norm();
    if (nrm > 1.0) latent.row(i) /= nrm;
  }

  ModelVector planted(r);
  for (int j = 0; j < r; ++j) planted[j] = rng.normal();
  planted *= signal_scale / std::max(planted.norm(), 1e-12);

  Eigen::VectorXd margins = latent * planted;
  Eigen::VectorXd labels(n);
  for (long i = 0; i < n; ++i) {
    const double prob_pos = 1.0 / (1.0 + std::exp(-margins[i]));
    labels[i] = rng.uniform() < prob_pos ? 1.0 : -1.0;
  }

  // The embedding (an isometry) consumes randomness last: the same seed then
  // plants the identical latent problem at every ambient dimension, which is
  // exactly what dimension-independence comparisons want.
  Eigen::MatrixXd embedding;
  if (r == p) {
    embedding = Eigen::MatrixXd::Identity(p, r);
  } else {
    Eigen::MatrixXd g(p, r);
    for (Eigen::Index i = 0; i < p; ++i)
      for (int j = 0; j < r; ++j) g(i, j) = rng.normal();
    embedding = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(p, r);
  }

  FeatureMatrix x = (latent * embedding.transpose()).eval();
  SyntheticGlm out{GlmDataset(std::move(x), std::move(labels), 1.0), std::move(latent), std::move(embedding),
                   std::move(planted)};
  return out;
}

// Raw (unnormalized) synthetic features for the benchmark pipeline; shaped
// like a small tabular binary classification source, to be run through
// preprocess().
struct SyntheticRawSplits {
  GlmDataset train;
  GlmDataset test;
};

inline SyntheticRawSplits synthetic_raw_binary(long n_train, long n_test, Eigen::Index raw_dim, double signal_scale,
                                               std::uint64_t seed) {
  if (n_train < 1 || n_test < 1 || raw_dim < 1) throw ParamError("synthetic_raw_binary: bad shape");
  RngStream rng(seed);
  ModelVector w(raw_dim);
  for (Eigen::Index j = 0; j < raw_dim; ++j) w[j] = rng.normal();
  w *= signal_scale / std::max(w.norm(), 1e-12);
  const auto make = [&](long n) {
    FeatureMatrix x(n, raw_dim);
    Eigen::VectorXd y(n);
    for (long i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < raw_dim; ++j) x(i, j) = rng.normal();
      const double z = x.row(i).dot(w);
      y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : -1.0;
    }
    return GlmDataset(std::move(x), std::move(y));
  };
  auto train = make(n_train);
  auto test = make(n_test);
  return SyntheticRawSplits{std::move(train), std::move(test)};
}

}  // namespace dpglm
