#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dpglm/data_io.hpp"
#include "dpglm/losses.hpp"
#include "dpglm/optimizer.hpp"
#include "dpglm/subspace.hpp"

namespace {

namespace fs = std::filesystem;
using dpglm::GlmDataset;
using dpglm::ModelVector;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("dpglm_test_" + std::to_string(::getpid()) + "_" +
                                                 std::to_string(counter_++))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path file(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

TEST(SparseLoader, ParsesIndexValuePairs) {
  TempDir dir;
  {
    std::ofstream out(dir.file("data.txt"));
    out << "1 1:0.5 3:-0.2\n";
    out << "-1 2:1.25\n";
  }
  const GlmDataset data = dpglm::load_sparse_dataset(dir.file("data.txt").string());
  ASSERT_EQ(data.n(), 2);
  ASSERT_EQ(data.dim(), 3);
  EXPECT_EQ(data.features()(0, 0), 0.5);
  EXPECT_EQ(data.features()(0, 1), 0.0);
  EXPECT_EQ(data.features()(0, 2), -0.2);
  EXPECT_EQ(data.y(0), 1.0);
  EXPECT_EQ(data.features()(1, 1), 1.25);
  EXPECT_EQ(data.y(1), -1.0);
}

TEST(SparseLoader, EmptyFileIsAnError) {
  TempDir dir;
  { std::ofstream out(dir.file("empty.txt")); }
  EXPECT_THROW(dpglm::load_sparse_dataset(dir.file("empty.txt").string()), dpglm::ParseError);
  EXPECT_THROW(dpglm::load_sparse_dataset(dir.file("missing.txt").string()), dpglm::Error);
}

TEST(SparseLoader, MalformedLinesCarryLineNumbers) {
  TempDir dir;
  {
    std::ofstream out(dir.file("bad.txt"));
    out << "1 1:0.5\n";
    out << "1 nonsense\n";
  }
  try {
    dpglm::load_sparse_dataset(dir.file("bad.txt").string());
    FAIL() << "expected ParseError";
  } catch (const dpglm::ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(SparseLoader, DataDirEnvOverride) {
  TempDir dir;
  {
    std::ofstream out(dir.file("env_data.txt"));
    out << "1 1:2.0\n";
  }
  ::setenv("DPGLM_DATA_DIR", dir.path().c_str(), 1);
  const GlmDataset data = dpglm::load_sparse_dataset("env_data.txt");
  EXPECT_EQ(data.n(), 1);
  ::unsetenv("DPGLM_DATA_DIR");
}

GlmDataset small_raw() {
  dpglm::FeatureMatrix x(4, 2);
  x << 0.0, 7.0, 2.0, 7.0, 4.0, 7.0, 1.0, 7.0;  // second feature constant
  Eigen::VectorXd y(4);
  y << 1, -1, 1, -1;
  return GlmDataset(std::move(x), std::move(y));
}

TEST(Preprocess, PipelineContract) {
  const auto raw = small_raw();
  const auto [train, test, stats] = dpglm::preprocess(raw, raw);
  EXPECT_EQ(train.dim(), raw.dim() + 1);
  for (Eigen::Index i = 0; i < train.n(); ++i) {
    EXPECT_LE(train.row_norm(i), 1.0 + 1e-9);
    EXPECT_EQ(train.features()(i, 1), 0.0);  // constant-on-train feature maps to 0
    EXPECT_NEAR(train.features()(i, 2), 1.0 / std::sqrt(3.0), 1e-12);  // p = 2 raw features
  }
  // min/max recorded from train
  EXPECT_EQ(stats.feature_min[0], 0.0);
  EXPECT_EQ(stats.feature_max[0], 4.0);
  // scaled first feature spans [-0.5, 0.5] before ball projection
  EXPECT_NEAR(train.features()(0, 0), -0.5, 1e-12);
  EXPECT_NEAR(train.features()(2, 0), 0.5, 1e-12);
}

TEST(Preprocess, FitOnTrainAppliedToTest) {
  const auto train_raw = small_raw();
  dpglm::FeatureMatrix tx(1, 2);
  tx << 8.0, 9.0;  // outside the train range
  Eigen::VectorXd ty(1);
  ty << 1;
  const GlmDataset test_raw(tx, ty);
  const auto [train, test, stats] = dpglm::preprocess(train_raw, test_raw);
  (void)train;
  // applying the recorded stats again reproduces the output bit for bit
  const auto reapplied = dpglm::apply_preprocess(test_raw, stats);
  EXPECT_EQ(test.features(), reapplied.features());
  // the out-of-range value maps via the train min/max then gets ball-projected
  EXPECT_LE(test.row_norm(0), 1.0 + 1e-9);
}

TEST(Preprocess, MismatchedSplitDimsThrow) {
  const auto train_raw = small_raw();
  dpglm::FeatureMatrix tx(1, 3);
  tx << 1, 2, 3;
  Eigen::VectorXd ty(1);
  ty << 1;
  EXPECT_THROW(dpglm::preprocess(train_raw, GlmDataset(tx, ty)), dpglm::ShapeError);
}

TEST(PadDimensions, IdentityAndInvariance) {
  const auto raw = small_raw();
  const auto same = dpglm::pad_dimensions(raw, raw.dim());
  EXPECT_EQ(same.features(), raw.features());
  const auto padded = dpglm::pad_dimensions(raw, 10);
  EXPECT_EQ(padded.dim(), 10);
  for (Eigen::Index i = 0; i < raw.n(); ++i) EXPECT_EQ(padded.row_norm(i), raw.row_norm(i));
  EXPECT_THROW(dpglm::pad_dimensions(raw, 1), dpglm::ParamError);
}

TEST(PadDimensions, ExactDescentAccuracyUnchangedByPadding) {
  const auto synth = dpglm::synthetic_rank_r_logistic(120, 6, 6, 2.5, 5);
  const auto padded = dpglm::pad_dimensions(synth.data, 40);
  dpglm::OptimizerConfig cfg;
  cfg.iterations = 150;
  cfg.learning_rate = 1.0;
  cfg.output = dpglm::OutputKind::LastIterate;
  cfg.seed = 4;
  const auto run0 = dpgd_run(synth.data, dpglm::logistic_loss(), cfg, dpglm::NoiseSpec::none());
  const auto run1 = dpgd_run(padded, dpglm::logistic_loss(), cfg, dpglm::NoiseSpec::none());
  EXPECT_EQ(dpglm::binary_accuracy(synth.data, run0.final_model),
            dpglm::binary_accuracy(padded, run1.final_model));
  // the padded coordinates never move under exact descent
  EXPECT_EQ(run1.final_model.tail(34).norm(), 0.0);
}

TEST(CsvWriter, Rfc4180LineEndingsAndQuoting) {
  TempDir dir;
  {
    dpglm::CsvWriter csv(dir.file("t.csv").string());
    csv.row({"a", "b,c", "d\"e"});
    csv.row({"1", "2", "3"});
  }
  std::ifstream in(dir.file("t.csv"), std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(content, "a,\"b,c\",\"d\"\"e\"\r\n1,2,3\r\n");
}

TEST(FloatFormatting, NineSignificantDigits) {
  EXPECT_EQ(dpglm::format_float(0.1), "0.1");
  EXPECT_EQ(dpglm::format_float(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(dpglm::format_float(123456789.123), "123456789");
  EXPECT_EQ(dpglm::sig9(1.0 / 3.0), 0.333333333);
}

TEST(Synthetic, RankStructureAndDeterminism) {
  const auto a = dpglm::synthetic_rank_r_logistic(200, 30, 5, 3.0, 77);
  const auto b = dpglm::synthetic_rank_r_logistic(200, 30, 5, 3.0, 77);
  EXPECT_EQ(a.data.features(), b.data.features());
  EXPECT_EQ(a.data.responses(), b.data.responses());

  // features factor exactly through the embedding
  EXPECT_LE((a.data.features() - (a.latent * a.embedding.transpose())).norm(), 1e-12);
  const Eigen::MatrixXd gram = a.embedding.transpose() * a.embedding;
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(5, 5)).norm(), 1e-12);
  for (Eigen::Index i = 0; i < a.data.n(); ++i) {
    EXPECT_LE(a.data.row_norm(i), 1.0 + 1e-12);
    EXPECT_TRUE(a.data.y(i) == 1.0 || a.data.y(i) == -1.0);
  }
  const auto m = dpglm::feature_projector(a.data);
  EXPECT_EQ(m.rank, 5);
}

TEST(Synthetic, RawSplitsShapes) {
  const auto splits = dpglm::synthetic_raw_binary(50, 20, 8, 3.0, 9);
  EXPECT_EQ(splits.train.n(), 50);
  EXPECT_EQ(splits.test.n(), 20);
  EXPECT_EQ(splits.train.dim(), 8);
  EXPECT_EQ(splits.test.dim(), 8);
}

TEST(CodRna, ShapeWhenFilePresent) {
  // only exercised when the real dataset is available locally
  const std::string resolved = dpglm::resolve_data_path("cod-rna.txt");
  if (!fs::exists(resolved)) GTEST_SKIP() << "cod-rna.txt not present";
  const auto data = dpglm::load_sparse_dataset(resolved);
  EXPECT_EQ(data.n(), 59535);
  EXPECT_EQ(data.dim(), 8);
}

}  // namespace
