#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "lazyadv/theory.hpp"
#include "lazyadv/training.hpp"

namespace lazyadv::cli {

namespace fs = std::filesystem;

double synth_margin(const DataConfig& cfg, Index d) {
  const double margin = cfg.margin_scale > 0 ? cfg.margin_scale / std::sqrt(static_cast<double>(d)) : cfg.margin;
  if (!(margin >= 0 && margin < 1))
    throw ConfigError("synthetic margin " + format_double(margin) + " at d=" + std::to_string(d) + " is outside [0, 1)");
  return margin;
}

std::shared_ptr<const Split> DataProvider::get(Index d) {
  std::lock_guard lock(mu_);
  auto it = cache_.find(d);
  if (it != cache_.end()) return it->second;
  auto split = build(d);
  cache_.emplace(d, split);
  return split;
}

std::shared_ptr<const Split> DataProvider::build(Index d) {
  auto out = std::make_shared<Split>();
  switch (cfg_.source) {
    case DataSource::synth: {
      const double margin = synth_margin(cfg_, d);
      Rng rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(d)));
      out->train = synth_sphere(rng, d, cfg_.n_train, margin);
      out->test = synth_sphere(rng, d, cfg_.n_test, margin);
      break;
    }
    case DataSource::mnist: {
      const auto k = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(d))));
      if (k * k != d) throw ConfigError("mnist source needs square d, got " + std::to_string(d));
      if (!raw_) {
        RawImageSet tr = extract_binary(load_idx_files(cfg_.train_images, cfg_.train_labels), cfg_.pos_digit, cfg_.neg_digit);
        RawImageSet te = extract_binary(load_idx_files(cfg_.test_images, cfg_.test_labels), cfg_.pos_digit, cfg_.neg_digit);
        raw_.emplace(std::move(tr), std::move(te));
      }
      if (k > raw_->first.rows || k > raw_->first.cols) throw ConfigError("d exceeds the image resolution");
      out->train = to_sphere_dataset(downsample(raw_->first, k), cfg_.normalize, cfg_.pos_digit, cfg_.neg_digit);
      out->test = to_sphere_dataset(downsample(raw_->second, k), cfg_.normalize, cfg_.pos_digit, cfg_.neg_digit);
      break;
    }
    case DataSource::cache: {
      const fs::path dir(cfg_.cache_dir);
      out->train = load_dataset(dir / ("train_d" + std::to_string(d) + ".lzds"));
      out->test = load_dataset(dir / ("test_d" + std::to_string(d) + ".lzds"));
      if (out->train.dim() != d || out->test.dim() != d) throw ConsistencyError("cached dataset has the wrong dimension");
      break;
    }
  }
  return out;
}

void run_indexed(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, jobs));
  if (threads == 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

std::mutex log_mu;

void log(const RunOptions& opt, const std::string& line) {
  if (opt.quiet) return;
  std::lock_guard lock(log_mu);
  std::cerr << line << '\n';
}

std::vector<std::uint64_t> run_seeds(const ExperimentConfig& cfg, const RunOptions& opt) {
  std::vector<std::uint64_t> out;
  for (auto s : cfg.seeds) out.push_back(s + opt.seed_offset);
  return out;
}

std::string provenance(const ExperimentConfig& cfg, const RunOptions& opt) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  std::string seeds;
  for (auto s : run_seeds(cfg, opt)) seeds += (seeds.empty() ? "" : ";") + std::to_string(s);
  return std::string("config_hash=") + hash + " seed_offset=" + std::to_string(opt.seed_offset) + " seeds=" + seeds;
}

void write_table(CsvTable& t, const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& path) {
  t.set_comment(provenance(cfg, opt));
  fs::create_directories(path.parent_path());
  t.write(path);
}

std::string fmt(double v) { return format_double(v); }

std::string tag(Index d, Index m, double C0, std::uint64_t seed) {
  return "d" + std::to_string(d) + "_m" + std::to_string(m) + "_C0" + fmt(C0) + "_s" + std::to_string(seed);
}

fs::path checkpoint_path(const ExperimentConfig& cfg, Index d, Index m, double C0, std::uint64_t seed) {
  return fs::path(cfg.out) / "checkpoints" / ("train_" + tag(d, m, C0, seed) + ".lzck");
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct TrainTask {
  Index d, m;
  double C0;
  std::uint64_t seed;
};

std::vector<TrainTask> train_tasks(const ExperimentConfig& cfg, const RunOptions& opt) {
  std::vector<TrainTask> tasks;
  for (long d : cfg.grid.d)
    for (long m : cfg.grid.m)
      for (double c : cfg.grid.C0)
        for (auto s : run_seeds(cfg, opt)) tasks.push_back({d, m, c, s});
  return tasks;
}

TrainConfig train_config(const TrainSection& t) {
  TrainConfig tc;
  tc.lr_sgd = t.lr_sgd;
  tc.beta = t.beta;
  tc.batch_size = t.batch_size;
  tc.max_epochs = t.max_epochs;
  tc.patience = t.patience;
  tc.inner_pgd_steps = t.inner_pgd_steps;
  tc.pgd_alpha = t.pgd_alpha;
  tc.pgd_step = t.pgd_step == "normalized" ? PgdStep::normalized : PgdStep::plain;
  tc.adv_reduction = t.reduction == "mean" ? BatchReduction::mean : BatchReduction::sum;
  return tc;
}

CsvTable report_table(const TrainReport& rep) {
  CsvTable t({"epoch", "loss", "acc", "robust_acc", "lazy_dev", "stop_reason"});
  for (std::size_t i = 0; i < rep.epochs.size(); ++i) {
    const EpochRecord& e = rep.epochs[i];
    const bool last = i + 1 == rep.epochs.size();
    t.add_row({std::to_string(e.epoch), fmt(e.loss), fmt(e.accuracy), fmt(e.robust_accuracy), fmt(e.lazy_deviation),
               last ? std::string(to_string(rep.stop_reason)) : ""});
  }
  return t;
}

void require_grid(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("grid needs nonempty ") + what);
}

}  // namespace

int cmd_train(const ExperimentConfig& cfg, const RunOptions& opt) {
  require_grid(!cfg.grid.d.empty() && !cfg.grid.m.empty() && !cfg.grid.C0.empty() && !cfg.seeds.empty(),
               "d, m, C0 and seeds");
  DataProvider data(cfg.data);
  const auto tasks = train_tasks(cfg, opt);
  std::vector<std::vector<std::string>> rows(tasks.size());
  run_indexed(tasks.size(), opt.jobs, [&](std::size_t i) {
    const TrainTask& t = tasks[i];
    const auto split = data.get(t.d);
    Rng init(derive_seed(t.seed, 1));
    Network net = init_network(init, t.d, t.m);
    TrainConfig tc = train_config(cfg.train);
    tc.radius = t.C0 / std::sqrt(static_cast<double>(t.m));
    tc.seed = derive_seed(t.seed, 2);
    const fs::path ckpt = checkpoint_path(cfg, t.d, t.m, t.C0, t.seed);
    fs::create_directories(ckpt.parent_path());
    tc.on_epoch = [&](const Network& n, const EpochRecord&) { save_checkpoint(ckpt, {n, t.seed, t.C0}); };
    auto [trained, rep] = sgd_lazy_train(std::move(net), split->train, tc);
    save_checkpoint(ckpt, {trained, t.seed, t.C0});
    CsvTable report = report_table(rep);
    write_table(report, cfg, opt, fs::path(cfg.out) / "reports" / ("train_" + tag(t.d, t.m, t.C0, t.seed) + ".csv"));
    const EpochRecord& last = rep.epochs.back();
    rows[i] = {std::to_string(t.d), std::to_string(t.m), fmt(t.C0), std::to_string(t.seed), std::to_string(rep.epochs_run),
               std::to_string(rep.steps_committed), std::string(to_string(rep.stop_reason)), fmt(last.loss),
               fmt(last.accuracy), fmt(clean_accuracy(trained, split->test)), fmt(lazy_deviation(trained)), fmt(tc.radius)};
    log(opt, "train " + tag(t.d, t.m, t.C0, t.seed) + " " + std::string(to_string(rep.stop_reason)));
  });
  CsvTable summary({"d", "m", "C0", "seed", "epochs_run", "steps", "stop_reason", "train_loss", "train_acc", "test_acc",
                    "lazy_dev", "radius"});
  for (auto& r : rows) summary.add_row(std::move(r));
  write_table(summary, cfg, opt, fs::path(cfg.out) / "train_summary.csv");
  return kOk;
}

int cmd_attack(const ExperimentConfig& cfg, const RunOptions& opt) {
  require_grid(!cfg.grid.d.empty() && !cfg.grid.m.empty() && !cfg.grid.C0.empty() && !cfg.seeds.empty(),
               "d, m, C0 and seeds");
  DataProvider data(cfg.data);
  const auto tasks = train_tasks(cfg, opt);
  const AttackSection& a = cfg.attack;

  struct Agg {
    double eta, grad, delta_rel;
  };
  std::vector<std::vector<std::string>> rows(tasks.size());
  std::vector<Agg> aggs(tasks.size());
  run_indexed(tasks.size(), opt.jobs, [&](std::size_t i) {
    const TrainTask& t = tasks[i];
    const Checkpoint ck = load_checkpoint(checkpoint_path(cfg, t.d, t.m, t.C0, t.seed));
    if (ck.net.dim() != t.d || ck.net.width() != t.m) throw ConsistencyError("checkpoint does not match its grid point");
    const auto split = data.get(t.d);
    const LabeledDataset& test = split->test;
    const double budget = a.budget_scale > 0 ? a.budget_scale / std::sqrt(static_cast<double>(t.d)) : 0.0;

    CsvTable per({"example_id", "f_before", "grad_norm", "eta_min", "delta_norm", "flipped", "label", "status"});
    std::vector<double> etas, grads, deltas;
    std::size_t errors = 0;
    for (std::size_t k = 0; k < test.size(); ++k) {
      const Vector x = test.inputs.col(static_cast<Index>(k));
      const int y = test.labels[k];
      AttackOutcome o;
      if (a.kind == "single_step") {
        o = single_step_attack(ck.net, x, a.C2);
      } else if (a.kind == "pgd") {
        PgdConfig p;
        p.radius = budget;
        p.steps = a.pgd_steps;
        o = pgd_attack(ck.net, x, y, p);
      } else {
        EtaSearchConfig s;
        s.tol = a.tol;
        s.grid_points = a.grid_points;
        s.grid_span = a.grid_span;
        s.bisection_steps = a.bisection_steps;
        s.eta_max = a.eta_max;
        if (budget > 0) {
          const double gn = input_gradient(ck.net, x).norm();
          if (gn > 0) s.eta_max = budget / gn;
        }
        o = minimal_eta_search(ck.net, x, s);
      }
      const bool clean_wrong = y * o.f_before <= 0.0;
      const bool fooled = a.kind == "pgd" ? o.flipped : clean_wrong || o.flipped;
      errors += fooled;
      if (o.flipped) {
        etas.push_back(std::abs(o.eta));
        deltas.push_back(o.delta_norm / x.norm());
      }
      grads.push_back(o.grad_norm);
      per.add_row({std::to_string(k), fmt(o.f_before), fmt(o.grad_norm), fmt(std::abs(o.eta)), fmt(o.delta_norm),
                   o.flipped ? "1" : "0", std::to_string(y), std::string(to_string(o.status))});
    }
    write_table(per, cfg, opt, fs::path(cfg.out) / "attacks" / ("attack_" + tag(t.d, t.m, t.C0, t.seed) + ".csv"));
    aggs[i] = {median(etas), median(grads), median(deltas)};
    rows[i] = {std::to_string(t.d), std::to_string(t.m), fmt(t.C0), std::to_string(t.seed), std::to_string(test.size()),
               std::to_string(etas.size()), fmt(aggs[i].eta), fmt(aggs[i].grad), fmt(aggs[i].delta_rel),
               fmt(static_cast<double>(errors) / static_cast<double>(test.size()))};
    log(opt, "attack " + tag(t.d, t.m, t.C0, t.seed));
  });

  CsvTable agg({"d", "m", "C0", "seed", "n", "flipped", "median_eta_min", "median_grad_norm", "median_delta_rel",
                "robust_error"});
  for (auto& r : rows) agg.add_row(std::move(r));
  write_table(agg, cfg, opt, fs::path(cfg.out) / "attack_aggregate.csv");

  CsvTable fits({"m", "C0", "quantity", "slope", "intercept", "r2"});
  for (long m : cfg.grid.m)
    for (double c : cfg.grid.C0) {
      std::vector<std::pair<double, double>> eta, grad, delta;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].m != m || tasks[i].C0 != c) continue;
        const double d = static_cast<double>(tasks[i].d);
        if (aggs[i].eta > 0) eta.emplace_back(d, aggs[i].eta);
        if (aggs[i].grad > 0) grad.emplace_back(d, aggs[i].grad);
        if (aggs[i].delta_rel > 0) delta.emplace_back(d, aggs[i].delta_rel);
      }
      for (const auto& [name, pairs] : {std::pair{"eta_min", eta}, {"grad_norm", grad}, {"delta_rel", delta}}) {
        std::vector<double> ds;
        for (const auto& p : pairs) ds.push_back(p.first);
        std::sort(ds.begin(), ds.end());
        if (std::unique(ds.begin(), ds.end()) - ds.begin() < 4) continue;
        const PowerLawFit f = scaling_fit(pairs);
        fits.add_row({std::to_string(m), fmt(c), name, fmt(f.slope), fmt(f.intercept), fmt(f.r2)});
      }
    }
  write_table(fits, cfg, opt, fs::path(cfg.out) / "attack_scaling.csv");
  return kOk;
}

int cmd_advtrain(const ExperimentConfig& cfg, const RunOptions& opt) {
  if (cfg.seeds.empty()) throw ConfigError("advtrain needs seeds");
  DataProvider data(cfg.data);
  std::vector<AdvSweep> sweeps = cfg.sweeps;
  if (sweeps.empty()) sweeps.push_back({"grid", cfg.grid});

  for (const AdvSweep& sw : sweeps) {
    struct Task {
      Index d, m;
      double V, R;
      std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (long d : sw.grid.d)
      for (long m : sw.grid.m) {
        std::vector<double> vs = sw.grid.V;
        for (double s : sw.grid.V_scale) vs.push_back(s / std::sqrt(static_cast<double>(m)));
        std::vector<double> rs = sw.grid.R;
        for (double s : sw.grid.R_scale) rs.push_back(s / std::sqrt(static_cast<double>(d)));
        for (double v : vs)
          for (double r : rs)
            for (auto s : run_seeds(cfg, opt)) tasks.push_back({d, m, v, r, s});
      }
    if (tasks.empty()) throw ConfigError("sweep '" + sw.name + "' has an empty grid");

    std::vector<std::vector<std::string>> rows(tasks.size());
    run_indexed(tasks.size(), opt.jobs, [&](std::size_t i) {
      const Task& t = tasks[i];
      const auto split = data.get(t.d);
      Rng init(derive_seed(t.seed, 1));
      TrainConfig tc = train_config(cfg.train);
      tc.radius = t.V;
      tc.pgd_budget = t.R;
      tc.seed = derive_seed(t.seed, 2);
      auto [trained, rep] = projected_adversarial_train(init_network(init, t.d, t.m), split->train, tc);
      PgdConfig eval;
      eval.radius = t.R;
      eval.steps = tc.inner_pgd_steps;
      eval.alpha = tc.pgd_alpha;
      eval.step = tc.pgd_step;
      const double robust = robust_accuracy(trained, split->test, eval);
      const double clean = clean_accuracy(trained, split->test);
      rows[i] = {std::to_string(t.d), std::to_string(t.m), fmt(t.V), fmt(t.R), fmt(robust), fmt(clean), std::to_string(t.seed)};
      log(opt, "advtrain " + sw.name + " d=" + std::to_string(t.d) + " m=" + std::to_string(t.m) + " V=" + fmt(t.V) +
                   " R=" + fmt(t.R) + " robust=" + fmt(robust));
    });
    CsvTable table({"d", "m", "V", "R", "robust_acc", "clean_acc", "seed"});
    for (auto& r : rows) table.add_row(std::move(r));
    write_table(table, cfg, opt, fs::path(cfg.out) / ("advtrain_" + sw.name + ".csv"));
  }
  return kOk;
}

int cmd_verify(const ExperimentConfig& cfg, const RunOptions& opt) {
  const VerifySection& v = cfg.verify;
  struct Task {
    Index d, m;
  };
  std::vector<Task> tasks;
  if (!cfg.grid.C0.empty())
    for (long d : cfg.grid.d)
      for (long m : cfg.grid.m) tasks.push_back({d, m});
  const auto seeds = run_seeds(cfg, opt);

  std::vector<std::vector<BoundReport>> results(tasks.size());
  run_indexed(tasks.size(), opt.jobs, [&](std::size_t i) {
    const Task& t = tasks[i];
    const std::uint64_t point = (static_cast<std::uint64_t>(t.d) << 32) ^ static_cast<std::uint64_t>(t.m);
    std::vector<LemmaTally> total;
    for (auto s : seeds) {
      LemmaMonteCarloConfig mc;
      mc.d = t.d;
      mc.m = t.m;
      mc.C0s = cfg.grid.C0;
      mc.gammas = v.gammas;
      mc.n_seeds = v.n_seeds;
      mc.base_seed = derive_seed(s, point);
      const auto tallies = lemma_monte_carlo(mc);
      if (total.empty()) {
        total = tallies;
      } else {
        for (std::size_t k = 0; k < total.size(); ++k) {
          total[k].trials += tallies[k].trials;
          total[k].violations += tallies[k].violations;
          total[k].vacuous += tallies[k].vacuous;
        }
      }
    }
    for (const LemmaTally& tl : total) {
      BoundReport r;
      r.name = tl.lemma;
      r.gamma = tl.gamma;
      r.context = {t.d, t.m, tl.C0, 0.0};
      r.measured = tl.frequency();
      r.vacuous = tl.trials == 0;
      r.theoretical = r.vacuous ? tl.gamma : tl.gamma + binomial_slack(tl.gamma, tl.trials);
      r.satisfied = r.vacuous || r.measured <= r.theoretical;
      results[i].push_back(r);
    }

    // Probes on one fresh initialization per grid point.
    Rng rng(derive_seed(seeds.empty() ? 0 : seeds.front(), point ^ 0x9e37ULL));
    const Network net = init_network(rng, t.d, t.m);
    const Vector x = sample_unit_sphere(rng, t.d);
    for (double c : cfg.grid.C0) {
      BoundReport g = grad_diff_probe(net, x, v.grad_diff_R_scale / std::sqrt(static_cast<double>(t.d)),
                                      v.grad_diff_probes, rng, c, v.C1);
      log(opt, "verify grad_diff d=" + std::to_string(t.d) + " m=" + std::to_string(t.m) + " " + g.note);
      results[i].push_back(g);
    }
    results[i].push_back(sign_flip_probability_probe(net, x, v.sign_flip_R, v.sign_flip_probes, rng));
    log(opt, "verify d=" + std::to_string(t.d) + " m=" + std::to_string(t.m));
  });

  std::vector<BoundReport> all;
  for (auto& r : results) all.insert(all.end(), r.begin(), r.end());
  std::stable_sort(all.begin(), all.end(), [](const BoundReport& a, const BoundReport& b) {
    return std::tie(a.name, a.context.d, a.context.m) < std::tie(b.name, b.context.d, b.context.m);
  });
  CsvTable table = bound_report_table(all);
  write_table(table, cfg, opt, fs::path(cfg.out) / "verify.csv");
  return verification_exit_code(all);
}

int verification_exit_code(const std::vector<BoundReport>& rows) {
  bool ok = true;
  for (const BoundReport& r : rows) {
    if (r.satisfied) continue;
    ok = false;
    std::cerr << "verification failed: " << r.name << " gamma=" << fmt(r.gamma) << " d=" << r.context.d
              << " m=" << r.context.m << " C0=" << fmt(r.context.C0) << " measured=" << fmt(r.measured)
              << " allowed=" << fmt(r.theoretical) << '\n';
  }
  return ok ? kOk : kVerifyFailed;
}

int cmd_data_prepare(const ExperimentConfig& cfg, const RunOptions& opt) {
  require_grid(!cfg.grid.d.empty(), "d");
  DataProvider data(cfg.data);
  const fs::path dir = fs::path(cfg.out) / "data";
  fs::create_directories(dir);
  CsvTable summary({"split", "d", "n", "positive", "negative", "dropped_degenerate", "normalized"});
  for (long d : cfg.grid.d) {
    const auto split = data.get(d);
    for (const auto& [name, set] : {std::pair<const char*, const LabeledDataset*>{"train", &split->train}, {"test", &split->test}}) {
      save_dataset(dir / (std::string(name) + "_d" + std::to_string(d) + ".lzds"), *set);
      const auto pos = std::count(set->labels.begin(), set->labels.end(), std::int8_t{1});
      summary.add_row({name, std::to_string(d), std::to_string(set->size()), std::to_string(pos),
                       std::to_string(static_cast<long>(set->size()) - pos), std::to_string(set->dropped_degenerate),
                       set->normalized ? "1" : "0"});
    }
    log(opt, "data-prepare d=" + std::to_string(d));
  }
  write_table(summary, cfg, opt, fs::path(cfg.out) / "data_summary.csv");
  return kOk;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Lazy-regime two-layer ReLU networks: training, attacks and bound verification"};
  app.require_subcommand(1);
  std::string config_path, out_dir, train_images, train_labels, test_images, test_labels;
  int jobs = 1;
  std::uint64_t seed_offset = 0;
  bool quiet = false;

  const std::vector<std::pair<std::string, int (*)(const ExperimentConfig&, const RunOptions&)>> commands{
      {"train", cmd_train},   {"advtrain", cmd_advtrain},         {"attack", cmd_attack},
      {"verify", cmd_verify}, {"data-prepare", cmd_data_prepare}};
  const std::map<std::string, std::string> help{
      {"train", "Lazy SGD over the (d, m, C0, seed) grid"},
      {"advtrain", "Projected adversarial training sweeps"},
      {"attack", "Attack trained checkpoints"},
      {"verify", "Monte-Carlo verification of the concentration bounds"},
      {"data-prepare", "Write dataset caches for every d in the grid"}};
  for (const auto& [name, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "Output directory (overrides the config)");
    sub->add_option("--seed-offset", seed_offset, "Added to every seed");
    sub->add_option("--train-images", train_images);
    sub->add_option("--train-labels", train_labels);
    sub->add_option("--test-images", test_images);
    sub->add_option("--test-labels", test_labels);
    sub->add_flag("--quiet", quiet, "Suppress progress lines");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (!out_dir.empty()) cfg.out = out_dir;
    const bool any_path = !train_images.empty() || !train_labels.empty() || !test_images.empty() || !test_labels.empty();
    if (!train_images.empty()) cfg.data.train_images = train_images;
    if (!train_labels.empty()) cfg.data.train_labels = train_labels;
    if (!test_images.empty()) cfg.data.test_images = test_images;
    if (!test_labels.empty()) cfg.data.test_labels = test_labels;
    if (any_path) cfg.data.source = DataSource::mnist;
    validate_config(cfg);
    RunOptions opt{jobs, seed_offset, quiet};
    for (const auto& [name, fn] : commands)
      if (app.got_subcommand(name)) return fn(cfg, opt);
    return kConfigError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kDataError;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const LengthError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const ConsistencyError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const EmptyDataset& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kDataError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace lazyadv::cli
