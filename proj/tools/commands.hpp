#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <map>

#include "config.hpp"
#include "lazyadv/data.hpp"
#include "lazyadv/theory.hpp"

namespace lazyadv::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDataError = 2, kVerifyFailed = 3 };

struct RunOptions {
  int jobs = 1;
  std::uint64_t seed_offset = 0;
  bool quiet = false;
};

struct Split {
  LabeledDataset train;
  LabeledDataset test;
};

/// Margin used by the synthetic source at dimension d.
double synth_margin(const DataConfig& cfg, Index d);

/// Builds and memoizes the train/test split for each dimension. Safe to call
/// from several threads.
class DataProvider {
 public:
  explicit DataProvider(DataConfig cfg) : cfg_(std::move(cfg)) {}
  std::shared_ptr<const Split> get(Index d);

 private:
  std::shared_ptr<const Split> build(Index d);

  DataConfig cfg_;
  std::mutex mu_;
  std::optional<std::pair<RawImageSet, RawImageSet>> raw_;
  std::map<Index, std::shared_ptr<const Split>> cache_;
};

/// Calls fn(0..n-1) on up to `jobs` threads. The exception of the lowest
/// failing index is rethrown after all workers finish.
void run_indexed(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

int cmd_train(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_attack(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_advtrain(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_verify(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_data_prepare(const ExperimentConfig& cfg, const RunOptions& opt);

/// kOk when every row is satisfied, otherwise kVerifyFailed after listing
/// the failing rows on stderr.
int verification_exit_code(const std::vector<BoundReport>& rows);

/// Full command line entry point; maps exceptions to exit codes.
int run_cli(int argc, char** argv);

}  // namespace lazyadv::cli
