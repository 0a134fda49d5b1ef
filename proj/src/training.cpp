#include "lazyadv/training.hpp"

#include <cmath>
#include <numeric>

namespace lazyadv {

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::lazy_exit: return "lazy-exit";
    case StopReason::patience: return "patience";
    case StopReason::max_epochs: return "max-epochs";
  }
  return "unknown";
}

namespace {

void validate(const Network& net, const LabeledDataset& data, const TrainConfig& cfg) {
  if (data.size() == 0) throw EmptyDataset("training set is empty");
  if (data.dim() != net.dim()) throw InvalidDimension("dataset and network dimensions differ");
  if (cfg.batch_size < 1 || cfg.max_epochs < 1) throw InvalidArgument("batch size and epochs must be >= 1");
  if (!(cfg.radius >= 0)) throw InvalidArgument("lazy radius must be >= 0");
  if (cfg.patience < 0) throw InvalidArgument("patience must be >= 0");
}

struct Batch {
  Matrix X;
  std::vector<std::int8_t> y;
};

Batch gather(const LabeledDataset& data, const Matrix& inputs, std::span<const std::size_t> idx) {
  Batch b{Matrix(inputs.rows(), static_cast<Index>(idx.size())), {}};
  b.y.reserve(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    b.X.col(static_cast<Index>(j)) = inputs.col(static_cast<Index>(idx[j]));
    b.y.push_back(data.labels[idx[j]]);
  }
  return b;
}

EpochRecord evaluate(const Network& net, const LabeledDataset& data, int epoch) {
  const Vector f = forward_batch(net, data.inputs);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double margin = data.labels[i] * f[static_cast<Index>(i)];
    loss += softplus(-margin);
    correct += margin > 0;
  }
  EpochRecord rec;
  rec.epoch = epoch;
  rec.loss = loss / static_cast<double>(data.size());
  rec.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  rec.lazy_deviation = lazy_deviation(net);
  if (!std::isfinite(rec.loss)) throw DivergenceError("training loss is not finite");
  return rec;
}

}  // namespace

std::pair<Network, TrainReport> sgd_lazy_train(Network net, const LabeledDataset& data,
                                               const TrainConfig& cfg) {
  validate(net, data, cfg);
  if (!(cfg.lr_sgd > 0)) throw InvalidArgument("learning rate must be > 0");
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport report;
  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;
  bool exited = false;
  Matrix previous;
  for (int epoch = 1; epoch <= cfg.max_epochs && !exited; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
      const Batch b = gather(data, data.inputs, std::span(order).subspan(start, len));
      const Matrix G = weight_gradient(net, b.X, b.y);
      if (!G.allFinite()) throw DivergenceError("non-finite weight gradient");
      previous = net.weights();
      net.weights().noalias() -= cfg.lr_sgd * G;
      if (lazy_deviation(net) > cfg.radius) {
        net.weights() = previous;
        exited = true;
        break;
      }
      ++report.steps_committed;
    }
    EpochRecord rec = evaluate(net, data, epoch);
    report.epochs.push_back(rec);
    report.epochs_run = epoch;
    if (cfg.on_epoch) cfg.on_epoch(net, rec);
    if (exited) {
      report.stop_reason = StopReason::lazy_exit;
      break;
    }
    if (rec.loss < best_loss * (1.0 - 1e-4)) {
      best_loss = rec.loss;
      stale = 0;
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      report.stop_reason = StopReason::patience;
      break;
    }
  }
  return {std::move(net), std::move(report)};
}

std::pair<Network, TrainReport> projected_adversarial_train(Network net, const LabeledDataset& data,
                                                            const TrainConfig& cfg) {
  validate(net, data, cfg);
  if (!(cfg.pgd_budget > 0)) throw InvalidArgument("PGD budget R must be > 0");
  if (!(cfg.beta > 0)) throw InvalidArgument("beta must be > 0");
  if (cfg.inner_pgd_steps < 1) throw InvalidArgument("inner PGD steps must be >= 1");

  PgdConfig pgd;
  pgd.radius = cfg.pgd_budget;
  pgd.steps = cfg.inner_pgd_steps;
  pgd.alpha = cfg.pgd_alpha > 0 ? cfg.pgd_alpha : 2.5 * cfg.pgd_budget / 100.0;
  pgd.step = cfg.pgd_step;
  pgd.stop_on_success = false;

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = std::min(order.size(), static_cast<std::size_t>(cfg.batch_size));
  const std::size_t rounds = order.size() / bs;

  // Start inside the ball even if the caller handed us a drifted network.
  project_weights_inplace(net, cfg.radius);

  TrainReport report;
  Matrix best_weights = net.weights();
  double best_robust = -1.0;
  int stale = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const PgdBatchResult adv = pgd_batch(net, data.inputs, data.labels, pgd);
    const auto fooled = std::count(adv.success.begin(), adv.success.end(), std::uint8_t{1});
    const double robust = 1.0 - static_cast<double>(fooled) / static_cast<double>(data.size());
    bool stop = false;
    if (robust > best_robust) {
      best_robust = robust;
      best_weights = net.weights();
      stale = 0;
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      stop = true;
    }

    if (!stop) {
      rng.shuffle(order);
      const double step = cfg.beta * (cfg.adv_reduction == BatchReduction::sum ? static_cast<double>(bs) : 1.0);
      for (std::size_t r = 0; r < rounds; ++r) {
        const Batch b = gather(data, adv.adversarial, std::span(order).subspan(r * bs, bs));
        const Matrix G = weight_gradient(net, b.X, b.y);
        if (!G.allFinite()) throw DivergenceError("non-finite weight gradient");
        net.weights().noalias() -= step * G;
        project_weights_inplace(net, cfg.radius);
        ++report.steps_committed;
      }
    }

    EpochRecord rec = evaluate(net, data, epoch);
    rec.robust_accuracy = robust;
    report.epochs.push_back(rec);
    report.epochs_run = epoch;
    if (cfg.on_epoch) cfg.on_epoch(net, rec);
    if (stop) {
      report.stop_reason = StopReason::patience;
      break;
    }
  }
  net.weights() = best_weights;
  return {std::move(net), std::move(report)};
}

}  // namespace lazyadv
