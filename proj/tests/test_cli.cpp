#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"
#include "lazyadv/io.hpp"
#include "lazyadv/network.hpp"
#include "test_util.hpp"

using namespace lazyadv;
using namespace lazyadv::cli;
using lazyadv::testing::csv_body;
using lazyadv::testing::read_csv;
using lazyadv::testing::scratch_dir;
using lazyadv::testing::slurp;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"({
  "data": {"source": "synth", "margin": 0.5, "n_train": 80, "n_test": 30, "seed": 3},
  "grid": {"d": [9, 16], "m": [40], "C0": [10]},
  "seeds": [0, 1],
  "train": {"max_epochs": 3, "batch_size": 16, "inner_pgd_steps": 5, "beta": 0.05},
  "attack": {"kind": "min_eta"},
  "verify": {"gammas": [0.1], "n_seeds": 5, "grad_diff_probes": 8, "sign_flip_probes": 8},
  "out": "unused"
})";

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig cfg = parse_config(kSmallConfig);
  cfg.out = out.string();
  return cfg;
}

RunOptions quiet_opts(int jobs = 1, std::uint64_t offset = 0) { return {jobs, offset, true}; }

int run_binary(const std::vector<std::string>& args) {
  std::string cmd = LAZYADV_CLI_PATH;
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " --quiet > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string repo_path(const std::string& rel) { return std::string(LAZYADV_SOURCE_DIR) + "/" + rel; }

}  // namespace

TEST(Config, RoundTripsThroughJson) {
  const ExperimentConfig cfg = parse_config(kSmallConfig);
  EXPECT_EQ(parse_config(serialize_config(cfg)), cfg);
  EXPECT_EQ(cfg.grid.d, (std::vector<long>{9, 16}));
  EXPECT_EQ(cfg.train.max_epochs, 3);
  EXPECT_EQ(cfg.data.n_train, 80u);
}

TEST(Config, ShippedConfigsLoadAndValidate) {
  for (const char* name : {"configs/scaling_synth.json", "configs/advtrain_synth.json", "configs/verify_desk.json"}) {
    const ExperimentConfig cfg = load_config(repo_path(name));
    EXPECT_NO_THROW(validate_config(cfg)) << name;
  }
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(parse_config(R"({"bogus": 1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"train": {"lr": 0.1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"train": {"max_epochs": "ten"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"data": {"n_train": -5}})"), ConfigError);
  EXPECT_THROW(parse_config("not json"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ValidationCatchesBadValues) {
  ExperimentConfig cfg;
  cfg.data.margin = 1.0;
  EXPECT_THROW(validate_config(cfg), ConfigError);
  cfg = {};
  cfg.attack.kind = "fgsm";
  EXPECT_THROW(validate_config(cfg), ConfigError);
  cfg = {};
  cfg.seeds = {1, 1};
  EXPECT_THROW(validate_config(cfg), ConfigError);
  cfg = {};
  cfg.verify.gammas = {1.5};
  EXPECT_THROW(validate_config(cfg), ConfigError);
  cfg = {};
  cfg.data.source = DataSource::mnist;
  EXPECT_THROW(validate_config(cfg), ConfigError);
  EXPECT_NO_THROW(validate_config(ExperimentConfig{}));
}

TEST(Config, HashIgnoresOutputDirectory) {
  ExperimentConfig a = parse_config(kSmallConfig), b = a;
  b.out = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.train.max_epochs = 4;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(RunIndexed, VisitsEveryIndexOnce) {
  for (int jobs : {1, 3, 16}) {
    std::vector<std::atomic<int>> hits(25);
    run_indexed(25, jobs, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  run_indexed(0, 4, [](std::size_t) { FAIL(); });
}

TEST(RunIndexed, RethrowsLowestFailingIndex) {
  try {
    run_indexed(10, 4, [](std::size_t i) {
      if (i == 7 || i == 3) throw std::runtime_error("fail " + std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "fail 3");
  }
}

TEST(Data, SynthMarginScaling) {
  DataConfig c;
  c.margin = 0.3;
  EXPECT_DOUBLE_EQ(synth_margin(c, 100), 0.3);
  c.margin_scale = 5.0;
  EXPECT_DOUBLE_EQ(synth_margin(c, 100), 0.5);
  EXPECT_THROW(synth_margin(c, 16), ConfigError);
}

TEST(Data, ProviderIsDeterministicPerDimension) {
  DataConfig c;
  c.n_train = 20;
  c.n_test = 10;
  DataProvider a(c), b(c);
  EXPECT_EQ(a.get(12)->train.inputs, b.get(12)->train.inputs);
  EXPECT_EQ(a.get(12).get(), a.get(12).get());
  EXPECT_EQ(a.get(12)->test.size(), 10u);
}

TEST(Train, TwoSeedsGiveTwoCheckpointsAndReports) {
  const fs::path out = scratch_dir("cli_train");
  ExperimentConfig cfg = small_config(out);
  cfg.grid.d = {9};
  ASSERT_EQ(cmd_train(cfg, quiet_opts()), kOk);
  std::size_t checkpoints = 0, reports = 0;
  for (const auto& e : fs::directory_iterator(out / "checkpoints")) checkpoints += e.path().extension() == ".lzck";
  for (const auto& e : fs::directory_iterator(out / "reports")) reports += e.path().extension() == ".csv";
  EXPECT_EQ(checkpoints, 2u);
  EXPECT_EQ(reports, 2u);

  const Checkpoint ck = load_checkpoint(out / "checkpoints" / "train_d9_m40_C010_s1.lzck");
  EXPECT_LE(lazy_deviation(ck.net), 10.0 / std::sqrt(40.0));
  const auto rows = read_csv(out / "reports" / "train_d9_m40_C010_s1.csv");
  ASSERT_FALSE(rows.empty());
  EXPECT_FALSE(rows.back().at("stop_reason").empty());
  EXPECT_EQ(read_csv(out / "train_summary.csv").size(), 2u);
}

TEST(Train, RerunIsByteIdenticalAndJobsDoNotMatter) {
  const fs::path a = scratch_dir("cli_rerun_a"), b = scratch_dir("cli_rerun_b");
  ASSERT_EQ(cmd_train(small_config(a), quiet_opts(1)), kOk);
  ASSERT_EQ(cmd_train(small_config(b), quiet_opts(3)), kOk);
  EXPECT_EQ(slurp(a / "train_summary.csv"), slurp(b / "train_summary.csv"));
  EXPECT_EQ(slurp(a / "reports" / "train_d16_m40_C010_s0.csv"), slurp(b / "reports" / "train_d16_m40_C010_s0.csv"));
  EXPECT_EQ(slurp(a / "checkpoints" / "train_d16_m40_C010_s0.lzck"),
            slurp(b / "checkpoints" / "train_d16_m40_C010_s0.lzck"));
}

TEST(Train, ProvenanceCommentAndSeedOffset) {
  const fs::path out = scratch_dir("cli_offset");
  ExperimentConfig cfg = small_config(out);
  cfg.grid.d = {9};
  ASSERT_EQ(cmd_train(cfg, quiet_opts(1, 10)), kOk);
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "train_d9_m40_C010_s10.lzck"));
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "train_d9_m40_C010_s11.lzck"));
  const std::string text = slurp(out / "train_summary.csv");
  EXPECT_EQ(text.rfind("# config_hash=", 0), 0u);
  EXPECT_NE(text.find("seed_offset=10"), std::string::npos);
  EXPECT_NE(text.find("seeds=10;11"), std::string::npos);
}

TEST(Attack, AggregateMatchesPerExampleRows) {
  const fs::path out = scratch_dir("cli_attack");
  const ExperimentConfig cfg = small_config(out);
  ASSERT_EQ(cmd_train(cfg, quiet_opts()), kOk);
  ASSERT_EQ(cmd_attack(cfg, quiet_opts()), kOk);
  const auto agg = read_csv(out / "attack_aggregate.csv");
  ASSERT_EQ(agg.size(), 4u);
  for (const auto& row : agg) {
    const std::string tag = "d" + row.at("d") + "_m" + row.at("m") + "_C0" + row.at("C0") + "_s" + row.at("seed");
    const auto per = read_csv(out / "attacks" / ("attack_" + tag + ".csv"));
    ASSERT_EQ(std::to_string(per.size()), row.at("n"));
    std::size_t flipped = 0, errors = 0;
    std::vector<double> etas;
    for (const auto& p : per) {
      const bool f = p.at("flipped") == "1";
      flipped += f;
      errors += f || std::stod(p.at("label")) * std::stod(p.at("f_before")) <= 0;
      if (f) etas.push_back(std::stod(p.at("eta_min")));
      EXPECT_NEAR(std::stod(p.at("delta_norm")), std::stod(p.at("eta_min")) * std::stod(p.at("grad_norm")),
                  1e-9 * (1 + std::stod(p.at("delta_norm"))));
    }
    EXPECT_EQ(std::to_string(flipped), row.at("flipped"));
    EXPECT_NEAR(std::stod(row.at("robust_error")), static_cast<double>(errors) / per.size(), 1e-12);
    std::sort(etas.begin(), etas.end());
    ASSERT_FALSE(etas.empty());
    const std::size_t k = etas.size();
    const double med = k % 2 ? etas[k / 2] : 0.5 * (etas[k / 2 - 1] + etas[k / 2]);
    EXPECT_NEAR(std::stod(row.at("median_eta_min")), med, 1e-12 * (1 + med));
  }
}

TEST(Attack, MissingCheckpointIsIoError) {
  const ExperimentConfig cfg = small_config(scratch_dir("cli_nockpt"));
  EXPECT_THROW(cmd_attack(cfg, quiet_opts()), IoError);
}

TEST(AdvTrain, OneRowPerCell) {
  const fs::path out = scratch_dir("cli_adv");
  ExperimentConfig cfg = small_config(out);
  cfg.seeds = {0};
  cfg.grid.V = {0.5};
  cfg.grid.V_scale = {1.0, 2.0};
  cfg.grid.R_scale = {0.5};
  ASSERT_EQ(cmd_advtrain(cfg, quiet_opts()), kOk);
  const auto rows = read_csv(out / "advtrain_grid.csv");
  EXPECT_EQ(rows.size(), 2u * 3u * 1u);
  for (const auto& r : rows) {
    const double acc = std::stod(r.at("robust_acc"));
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, std::stod(r.at("clean_acc")) + 1e-12);
  }
}

TEST(AdvTrain, RobustAccuracySwitchesWithLazyRadius) {
  const fs::path out = scratch_dir("cli_adv_phase");
  ExperimentConfig cfg = parse_config(R"({
    "data": {"source": "synth", "margin": 0.235, "n_train": 1000, "n_test": 500, "seed": 1},
    "seeds": [0],
    "train": {"beta": 0.05, "batch_size": 128, "max_epochs": 100, "patience": 5, "inner_pgd_steps": 100},
    "sweeps": [{"name": "phase", "grid": {"d": [196], "m": [1000], "V_scale": [12.5, 50], "R": [0.2]}}]
  })");
  cfg.out = out.string();
  ASSERT_EQ(cmd_advtrain(cfg, quiet_opts()), kOk);
  const auto rows = read_csv(out / "advtrain_phase.csv");
  ASSERT_EQ(rows.size(), 2u);
  const double small_v = std::sqrt(1000.0) * std::stod(rows[0].at("V"));
  const auto& lo = small_v < 20 ? rows[0] : rows[1];
  const auto& hi = small_v < 20 ? rows[1] : rows[0];
  EXPECT_LE(std::stod(lo.at("robust_acc")), 0.10);
  EXPECT_GE(std::stod(hi.at("robust_acc")), 0.90);
}

TEST(Verify, EmptyGridGivesEmptyTable) {
  const fs::path out = scratch_dir("cli_verify_empty");
  ExperimentConfig cfg;
  cfg.out = out.string();
  EXPECT_EQ(cmd_verify(cfg, quiet_opts()), kOk);
  EXPECT_EQ(csv_body(out / "verify.csv"), "name,gamma,d,m,C0,R,theoretical,measured,satisfied\n");
}

TEST(Verify, RowsSortedAndSatisfied) {
  const fs::path out = scratch_dir("cli_verify");
  ExperimentConfig cfg = small_config(out);
  cfg.grid.d = {20, 10};
  cfg.grid.m = {200, 100};
  cfg.grid.C0 = {1.0};
  EXPECT_EQ(cmd_verify(cfg, quiet_opts(2)), kOk);
  const auto rows = read_csv(out / "verify.csv");
  ASSERT_EQ(rows.size(), 4u * (3 + 1 + 1));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto key = [](const auto& r) {
      return std::make_tuple(r.at("name"), std::stol(r.at("d")), std::stol(r.at("m")));
    };
    EXPECT_LE(key(rows[i - 1]), key(rows[i]));
  }
}

TEST(Verify, VerdictReportsFailures) {
  BoundReport ok;
  ok.satisfied = true;
  BoundReport bad = ok;
  bad.satisfied = false;
  EXPECT_EQ(verification_exit_code({}), kOk);
  EXPECT_EQ(verification_exit_code({ok, ok}), kOk);
  EXPECT_EQ(verification_exit_code({ok, bad}), kVerifyFailed);
}

TEST(DataPrepare, WritesCachesThatLoadBack) {
  const fs::path out = scratch_dir("cli_prep");
  const ExperimentConfig cfg = small_config(out);
  ASSERT_EQ(cmd_data_prepare(cfg, quiet_opts()), kOk);
  const LabeledDataset train = load_dataset(out / "data" / "train_d16.lzds");
  DataProvider provider(cfg.data);
  EXPECT_EQ(train.inputs, provider.get(16)->train.inputs);

  ExperimentConfig cached = cfg;
  cached.data.source = DataSource::cache;
  cached.data.cache_dir = (out / "data").string();
  DataProvider from_cache(cached.data);
  EXPECT_EQ(from_cache.get(16)->test.labels, provider.get(16)->test.labels);
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch_dir("cli_exit");
  write_file_atomic(dir / "bad.json", std::string(R"({"unknown_key": true})"));
  write_file_atomic(dir / "small.json", std::string(kSmallConfig));
  EXPECT_EQ(run_binary({}), kConfigError);
  EXPECT_EQ(run_binary({"train", "--config", (dir / "bad.json").string()}), kConfigError);
  EXPECT_EQ(run_binary({"train", "--config", (dir / "missing.json").string()}), kConfigError);
  EXPECT_EQ(run_binary({"attack", "--config", (dir / "small.json").string(), "--out", (dir / "none").string()}),
            kDataError);
  EXPECT_EQ(run_binary({"data-prepare", "--config", (dir / "small.json").string(), "--out", (dir / "o").string(),
                        "--train-images", "/nonexistent/a", "--train-labels", "/nonexistent/b", "--test-images",
                        "/nonexistent/c", "--test-labels", "/nonexistent/d"}),
            kDataError);
  EXPECT_EQ(run_binary({"data-prepare", "--config", (dir / "small.json").string(), "--out", (dir / "o").string()}),
            kOk);
  EXPECT_TRUE(fs::exists(dir / "o" / "data" / "train_d9.lzds"));
}
