#pragma once

#include <functional>
#include <limits>
#include <string_view>
#include <vector>

#include "lazyadv/attacks.hpp"
#include "lazyadv/data.hpp"
#include "lazyadv/network.hpp"

namespace lazyadv {

enum class StopReason : std::uint8_t { lazy_exit, patience, max_epochs };
std::string_view to_string(StopReason r);

/// How a minibatch gradient is reduced before the step.
enum class BatchReduction : std::uint8_t { mean, sum };

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;        // clean training loss at the end of the epoch
  double accuracy = 0.0;    // clean training accuracy
  double robust_accuracy = std::numeric_limits<double>::quiet_NaN();  // against this epoch's PGD set
  double lazy_deviation = 0.0;
};

struct TrainReport {
  int epochs_run = 0;
  long steps_committed = 0;
  std::vector<EpochRecord> epochs;
  StopReason stop_reason = StopReason::max_epochs;
};

struct TrainConfig {
  double lr_sgd = 0.1;        // lazy SGD step size
  double beta = 0.01;         // adversarial-training step size
  int batch_size = 128;
  double radius = 0.0;        // lazy radius: C0/sqrt(m), or V
  int max_epochs = 50;
  int patience = 5;           // epochs without improvement before stopping; 0 disables
  std::uint64_t seed = 0;     // minibatch shuffling

  // Adversarial training only.
  int inner_pgd_steps = 100;  // T2
  double pgd_budget = 0.0;    // R
  double pgd_alpha = 0.0;     // <= 0 selects 2.5 R / 100
  PgdStep pgd_step = PgdStep::plain;
  BatchReduction adv_reduction = BatchReduction::sum;

  std::function<void(const Network&, const EpochRecord&)> on_epoch;
};

/// Minibatch SGD on the logistic loss, top layer frozen. A step that takes
/// the weights outside B_{2,inf}(W0, radius) is reverted and training stops,
/// so the returned network always lies in the lazy ball. With patience > 0,
/// training also stops once the training loss stops decreasing.
std::pair<Network, TrainReport> sgd_lazy_train(Network net, const LabeledDataset& data,
                                               const TrainConfig& cfg);

/// Projected adversarial training. Each epoch builds a PGD adversarial copy
/// of the training set (T2 projected ascent steps per sample), runs
/// floor(n / bs) minibatch steps with rate beta on it, projecting W onto
/// B_{2,inf}(W0, radius) after every step, and tracks robust training
/// accuracy. Returns the weights with the best robust training accuracy.
std::pair<Network, TrainReport> projected_adversarial_train(Network net, const LabeledDataset& data,
                                                            const TrainConfig& cfg);

}  // namespace lazyadv
