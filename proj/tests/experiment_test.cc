// Copyright 2026 The fmfldp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fmfldp/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fmfldp/server.hpp"
#include "support/synthetic.hpp"

namespace fmfldp::experiment {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("fmfldp_experiment_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t count_lines(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n' ? 1 : 0;
  return lines;
}

// A small corpus every test can train on in well under a second. Items must
// comfortably exceed the 99 negatives each ranking task draws.
fs::path write_small_corpus(const TempDir& dir, std::uint64_t seed = 5) {
  test::SyntheticSpec spec;
  spec.n_users = 150;
  spec.n_items = 250;
  spec.zipf_exponent = 0.5;  // soft tail so the min-interaction filter keeps most items
  spec.mean_degree = 16.0;
  spec.degree_sigma = 0.4;
  const fs::path path = dir.path() / "ratings.csv";
  test::write_ratings_csv(path, test::make_synthetic_ratings(spec, seed));
  return path;
}

ExperimentConfig small_config(const fs::path& data, const fs::path& out_csv) {
  ExperimentConfig config;
  config.data_path = data.string();
  config.min_interactions = 2;
  config.n_users = 30;
  config.n_items = 200;
  config.hp.n_factors = 3;
  config.hp.epochs = 2;
  config.hp.reports_per_user = 10;
  config.output_path = out_csv.string();
  return config;
}

TEST(ConfigFile, SerializeParseRoundTripsEveryField) {
  ExperimentConfig config;
  config.data_path = "data/ratings.csv";
  config.min_interactions = 12;
  config.n_users = 345;
  config.n_items = std::nullopt;
  config.hp.n_factors = 7;
  config.hp.reg = 0.125;
  config.hp.learning_rate = 0.0625;
  config.hp.confidence_alpha = 35.5;
  config.hp.epochs = 9;
  config.hp.inner_steps = 4;
  config.hp.epsilon = 1.75;
  config.hp.reports_per_user = 55;
  config.split_mode = SplitMode::kLatestLeaveOneOut;
  config.n_splits = 3;
  config.cutoffs = {1, 5, 25};
  config.seed = 987654321;
  config.output_path = "out/metrics.csv";
  config.checkpoint_path = "out/model.fmf";
  config.mode = eval::ModelMode::kNonPrivate;
  config.eval_every = 4;
  config.sweep_epsilons = {0.5, 2.5, 6.0};
  config.sweep_reports = {1, 50, 250};
  config.sweep_sizes = {{1000, 1000}, {2000, 1500}};

  const std::string text = serialize_config(config);
  std::istringstream in(text);
  const ExperimentConfig parsed = parse_config(in);
  EXPECT_EQ(parsed, config);
  // Canonical form is a fixpoint.
  EXPECT_EQ(serialize_config(parsed), text);
}

TEST(ConfigFile, ParsesCommentsBlanksAndFullKeyword) {
  std::istringstream in(
      "# experiment setup\n"
      "data_path = ratings.csv\n"
      "\n"
      "n_users = full   # whole filtered dataset\n"
      "n_items = 500\n"
      "epsilon = 2.5\n");
  const ExperimentConfig config = parse_config(in);
  EXPECT_EQ(config.data_path, "ratings.csv");
  EXPECT_FALSE(config.n_users.has_value());
  ASSERT_TRUE(config.n_items.has_value());
  EXPECT_EQ(*config.n_items, 500u);
  EXPECT_EQ(config.hp.epsilon, 2.5);
}

TEST(ConfigFile, RejectsUnknownDuplicateAndMalformedKeysWithLineNumbers) {
  auto expect_error_at = [](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    try {
      parse_config(in);
      FAIL() << "expected parse error for:\n" << text;
    } catch (const std::runtime_error& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error_at("data_path = a\nbogus_key = 1\n", "line 2");
  expect_error_at("seed = 1\n\nseed = 2\n", "line 3");
  expect_error_at("epsilon\n", "line 1");
  expect_error_at("epochs = banana\n", "line 1");
  expect_error_at("cutoffs = 5,x\n", "line 1");
  expect_error_at("mode = sideways\n", "line 1");
}

TEST(ConfigFile, ApplyOverrideMatchesConfigSpelling) {
  ExperimentConfig config;
  apply_override(config, "epsilon", "6");
  EXPECT_EQ(config.hp.epsilon, 6.0);
  apply_override(config, "reports_per_user", "250");
  EXPECT_EQ(config.hp.reports_per_user, 250u);
  apply_override(config, "n_users", "full");
  EXPECT_FALSE(config.n_users.has_value());
  apply_override(config, "n_users", "1000");
  EXPECT_EQ(*config.n_users, 1000u);
  apply_override(config, "mode", "random");
  EXPECT_EQ(config.mode, eval::ModelMode::kRandom);
  apply_override(config, "sweep_epsilons", "0.5,2.5");
  EXPECT_EQ(config.sweep_epsilons, (std::vector<double>{0.5, 2.5}));
  EXPECT_THROW(apply_override(config, "no_such_key", "1"), std::runtime_error);
  EXPECT_THROW(apply_override(config, "epochs", "x"), std::runtime_error);
}

TEST(ConfigFile, ValidateCatchesContradictions) {
  ExperimentConfig config;
  config.data_path = "a.csv";
  EXPECT_NO_THROW(config.validate());
  config.n_splits = 0;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config.n_splits = 1;
  config.cutoffs = {10, 5};
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config.cutoffs = {5, 5};
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config.cutoffs = {5, 10};
  config.eval_every = 0;
  EXPECT_THROW(config.validate(), std::invalid_argument);
}

TEST(ResolveDataPath, UsesEnvVarForRelativePathsOnly) {
  ExperimentConfig config;
  config.data_path = "sub/ratings.csv";
  ::unsetenv(kDataDirEnvVar);
  EXPECT_EQ(resolve_data_path(config), fs::path("sub/ratings.csv"));
  ::setenv(kDataDirEnvVar, "/data/root", 1);
  EXPECT_EQ(resolve_data_path(config), fs::path("/data/root/sub/ratings.csv"));
  config.data_path = "/absolute/ratings.csv";
  EXPECT_EQ(resolve_data_path(config), fs::path("/absolute/ratings.csv"));
  ::unsetenv(kDataDirEnvVar);
}

TEST(RunExperiment, WritesDeterministicTraceCsv) {
  TempDir dir;
  const fs::path data = write_small_corpus(dir);
  const ExperimentConfig config = small_config(data, dir.path() / "metrics.csv");

  std::ostringstream out_a;
  run_experiment(config, out_a);
  const std::string csv_a = read_file(dir.path() / "metrics.csv");

  std::ostringstream out_b;
  run_experiment(config, out_b);
  const std::string csv_b = read_file(dir.path() / "metrics.csv");

  // Byte-identical console summary and trace for equal seeds.
  EXPECT_EQ(out_a.str(), out_b.str());
  EXPECT_EQ(csv_a, csv_b);
  ASSERT_FALSE(csv_a.empty());
  EXPECT_EQ(csv_a.substr(0, csv_a.find('\n')),
            "epoch,hr_at_2,hr_at_5,hr_at_10,loss,upload_bytes,download_bytes");
  // Header plus one row per evaluated epoch.
  EXPECT_EQ(count_lines(csv_a), 1u + config.hp.epochs);

  ExperimentConfig reseeded = config;
  reseeded.seed = 43;
  std::ostringstream out_c;
  run_experiment(reseeded, out_c);
  EXPECT_NE(read_file(dir.path() / "metrics.csv"), csv_a);
}

TEST(RunExperiment, PrintsSummaryBudgetAndMetrics) {
  TempDir dir;
  const fs::path data = write_small_corpus(dir);
  ExperimentConfig config = small_config(data, dir.path() / "metrics.csv");
  config.hp.epsilon = 2.5;
  config.hp.reports_per_user = 10;
  config.hp.epochs = 2;

  std::ostringstream out;
  run_experiment(config, out);
  const std::string text = out.str();
  EXPECT_NE(text.find("n_users=30"), std::string::npos) << text;
  EXPECT_NE(text.find("mode=ldp"), std::string::npos) << text;
  EXPECT_NE(text.find("epsilon_per_report=2.5"), std::string::npos) << text;
  EXPECT_NE(text.find("user_budget_per_epoch_eps=25"), std::string::npos) << text;
  EXPECT_NE(text.find("summary: mode=ldp"), std::string::npos) << text;
  EXPECT_NE(text.find("hr_at_10="), std::string::npos) << text;
}

TEST(RunExperiment, ZeroEpochsYieldHeaderOnlyTrace) {
  TempDir dir;
  const fs::path data = write_small_corpus(dir);
  ExperimentConfig config = small_config(data, dir.path() / "metrics.csv");
  config.hp.epochs = 0;

  std::ostringstream out;
  run_experiment(config, out);
  const std::string csv = read_file(dir.path() / "metrics.csv");
  EXPECT_EQ(count_lines(csv), 1u);
  // The summary still reports metrics of the untrained model.
  EXPECT_NE(out.str().find("summary: mode=ldp"), std::string::npos);
}

TEST(RunExperiment, RandomModeWritesSingleBaselineRow) {
  TempDir dir;
  const fs::path data = write_small_corpus(dir);
  ExperimentConfig config = small_config(data, dir.path() / "metrics.csv");
  config.mode = eval::ModelMode::kRandom;

  std::ostringstream out;
  run_experiment(config, out);
  const std::string csv = read_file(dir.path() / "metrics.csv");
  EXPECT_EQ(count_lines(csv), 2u);
  EXPECT_NE(csv.find("\n0,"), std::string::npos);  // epoch 0 row
  EXPECT_NE(out.str().find("mode=random"), std::string::npos);
}

TEST(RunExperiment, MultiSplitWritesOneTracePerSplit) {
  TempDir dir;
  const fs::path data = write_small_corpus(dir);
  ExperimentConfig config = small_config(data, dir.path() / "metrics.csv");
  config.n_splits = 2;
  config.hp.epochs = 1;

  std::ostringstream out;
  run_experiment(config, out);
  EXPECT_TRUE(fs::exists(dir.path() / "metrics.csv.split0"));
  EXPECT_TRUE(fs::exists(dir.path() / "metrics.csv.split1"));
  EXPECT_NE(read_file(dir.path() / "metrics.csv.split0"),
            read_file(dir.path() / "metrics.csv.split1"));
  EXPECT_NE(out.str().find("split=0"), std::string::npos);
  EXPECT_NE(out.str().find("split=1"), std::string::npos);
  EXPECT_NE(out.str().find("+/-"), std::string::npos);
}

TEST(RunExperiment, WritesCheckpointWhenConfigured) {
  TempDir dir;
  const fs::path data = write_small_corpus(dir);
  ExperimentConfig config = small_config(data, dir.path() / "metrics.csv");
  config.checkpoint_path = (dir.path() / "model.fmf").string();
  config.hp.epochs = 1;

  std::ostringstream out;
  run_experiment(config, out);
  ASSERT_TRUE(fs::exists(config.checkpoint_path));
  const mf::ItemMatrix V = server::load_item_matrix(config.checkpoint_path);
  EXPECT_EQ(V.rows(), 200);
  EXPECT_EQ(V.cols(), 3);
}

TEST(RunExperiment, EnvVarRedirectsRelativeDataPath) {
  TempDir dir;
  const fs::path data = write_small_corpus(dir);
  ExperimentConfig config = small_config(data, dir.path() / "metrics.csv");
  config.data_path = data.filename().string();  // relative to the temp dir

  ::setenv(kDataDirEnvVar, dir.path().c_str(), 1);
  std::ostringstream out;
  EXPECT_NO_THROW(run_experiment(config, out));
  ::unsetenv(kDataDirEnvVar);
}

TEST(RunSweep, WritesOneRowPerGridPointAndResumes) {
  TempDir dir;
  const fs::path data = write_small_corpus(dir);
  ExperimentConfig config = small_config(data, dir.path() / "sweep.csv");
  config.hp.epochs = 1;
  config.sweep_epsilons = {0.5, 6.0};
  config.sweep_reports = {5, 10};

  std::ostringstream out, err;
  ASSERT_EQ(run_sweep(config, out, err), 0) << err.str();
  const std::string csv = read_file(dir.path() / "sweep.csv");
  EXPECT_EQ(count_lines(csv), 1u + 4u);  // header + 2x2 grid
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "epsilon,k,n_users,n_items,hr_at_2,hr_at_5,hr_at_10");

  // Remove the last row; the rerun recomputes only the missing point.
  const std::size_t cut = csv.find_last_of('\n', csv.size() - 2);
  std::ofstream trunc(dir.path() / "sweep.csv", std::ios::binary | std::ios::trunc);
  trunc.write(csv.data(), static_cast<std::streamsize>(cut + 1));
  trunc.close();

  std::ostringstream out2, err2;
  ASSERT_EQ(run_sweep(config, out2, err2), 0) << err2.str();
  EXPECT_EQ(read_file(dir.path() / "sweep.csv"), csv);
  // Three skips and one fresh computation.
  std::size_t skips = 0;
  std::string line;
  std::istringstream log(out2.str());
  while (std::getline(log, line)) skips += line.rfind("skip", 0) == 0 ? 1 : 0;
  EXPECT_EQ(skips, 3u);
}

TEST(RunSweep, RejectsResumingAgainstForeignSchema) {
  TempDir dir;
  const fs::path data = write_small_corpus(dir);
  ExperimentConfig config = small_config(data, dir.path() / "sweep.csv");
  config.hp.epochs = 1;
  std::ofstream seeded(dir.path() / "sweep.csv");
  seeded << "something,else\n1,2\n";
  seeded.close();
  std::ostringstream out, err;
  EXPECT_THROW(run_sweep(config, out, err), std::runtime_error);
}

TEST(ReportCosts, PrintsTheCostTableWithoutData) {
  ExperimentConfig config;
  config.data_path = "unused.csv";
  config.n_items = 1000;
  config.hp.n_factors = 5;
  config.hp.epochs = 20;
  config.hp.reports_per_user = 100;
  std::ostringstream out;
  report_costs(config, out);
  const std::string text = out.str();
  EXPECT_NE(text.find("download_bytes_per_epoch=20000"), std::string::npos) << text;
  EXPECT_NE(text.find("upload_bytes_per_epoch=400"), std::string::npos) << text;
  EXPECT_NE(text.find("upload_wire_bytes_per_epoch=500"), std::string::npos) << text;
  EXPECT_NE(text.find("download_bytes_total=400000"), std::string::npos) << text;
  EXPECT_NE(text.find("upload_bytes_total=8000"), std::string::npos) << text;
  EXPECT_NE(text.find("upload_wire_bytes_total=10000"), std::string::npos) << text;
}

TEST(SummarizeCsv, GroupsByKeyColumnsAndAverages) {
  TempDir dir;
  const fs::path a = dir.path() / "a.csv";
  const fs::path b = dir.path() / "b.csv";
  std::ofstream(a) << "epoch,hr_at_10,loss\n1,0.2,10\n2,0.5,8\n";
  std::ofstream(b) << "epoch,hr_at_10,loss\n1,0.6,12\n2,0.7,6\n";

  std::ostringstream out;
  summarize_csv({a.string(), b.string()}, out);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "epoch,n,hr_at_10_mean,hr_at_10_std,loss_mean,loss_std");
  EXPECT_NE(text.find("\n1,2,0.4,"), std::string::npos) << text;
  EXPECT_NE(text.find("\n2,2,0.6,"), std::string::npos) << text;
  EXPECT_NE(text.find(",11,"), std::string::npos) << text;  // epoch 1 loss mean
  EXPECT_NE(text.find(",7,"), std::string::npos) << text;   // epoch 2 loss mean
}

TEST(SummarizeCsv, RejectsMismatchedHeaders) {
  TempDir dir;
  const fs::path a = dir.path() / "a.csv";
  const fs::path b = dir.path() / "b.csv";
  std::ofstream(a) << "epoch,hr_at_10\n1,0.2\n";
  std::ofstream(b) << "epoch,hr_at_5\n1,0.4\n";
  std::ostringstream out;
  EXPECT_THROW(summarize_csv({a.string(), b.string()}, out), std::runtime_error);
}

}  // namespace
}  // namespace fmfldp::experiment
