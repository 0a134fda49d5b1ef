#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lazyadv/errors.hpp"

namespace lazyadv::cli {

struct ConfigError : Error {
  using Error::Error;
};

enum class DataSource : std::uint8_t { synth, mnist, cache };

struct DataConfig {
  DataSource source = DataSource::synth;
  // synth only
  double margin = 0.5;
  double margin_scale = 0.0;  // > 0 replaces margin by margin_scale / sqrt(d)
  std::size_t n_train = 1000;
  std::size_t n_test = 500;
  std::uint64_t seed = 1;
  // mnist / cache
  bool normalize = true;
  int pos_digit = 1;
  int neg_digit = 0;
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  std::string cache_dir;

  bool operator==(const DataConfig&) const = default;
};

/// Sweep axes. V and R accept absolute values and values scaled by
/// 1/sqrt(m) and 1/sqrt(d) respectively; both lists contribute grid points.
struct GridConfig {
  std::vector<long> d;
  std::vector<long> m;
  std::vector<double> C0;
  std::vector<double> V;
  std::vector<double> V_scale;
  std::vector<double> R;
  std::vector<double> R_scale;

  bool operator==(const GridConfig&) const = default;
};

struct TrainSection {
  double lr_sgd = 0.1;
  double beta = 0.01;
  int batch_size = 128;
  int max_epochs = 50;
  int patience = 5;
  int inner_pgd_steps = 100;
  double pgd_alpha = 0.0;  // <= 0: 2.5 R / 100
  std::string pgd_step = "plain";
  std::string reduction = "sum";

  bool operator==(const TrainSection&) const = default;
};

struct AttackSection {
  std::string kind = "min_eta";  // min_eta | single_step | pgd
  double eta_max = 10.0;
  double budget_scale = 0.0;     // > 0 caps ||delta|| at budget_scale / sqrt(d)
  double tol = 1e-6;
  int grid_points = 64;
  double grid_span = 1e-8;
  int bisection_steps = 40;
  double C2 = 1.0;
  int pgd_steps = 100;

  bool operator==(const AttackSection&) const = default;
};

struct VerifySection {
  std::vector<double> gammas{0.1, 0.3};
  int n_seeds = 300;
  int grad_diff_probes = 200;
  double grad_diff_R_scale = 1.0;  // probe radius R_scale / sqrt(d)
  double C1 = 1.0;
  int sign_flip_probes = 200;
  double sign_flip_R = 0.1;

  bool operator==(const VerifySection&) const = default;
};

struct AdvSweep {
  std::string name;
  GridConfig grid;

  bool operator==(const AdvSweep&) const = default;
};

struct ExperimentConfig {
  DataConfig data;
  GridConfig grid;
  std::vector<std::uint64_t> seeds{0};
  TrainSection train;
  AttackSection attack;
  VerifySection verify;
  std::vector<AdvSweep> sweeps;  // advtrain; empty means one sweep over `grid`
  std::string out = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

/// Strict JSON decoding: unknown keys and ill-typed values raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// FNV-1a of the serialized config without the output directory.
std::uint64_t config_hash(const ExperimentConfig& cfg);

void validate_config(const ExperimentConfig& cfg);

}  // namespace lazyadv::cli
