#include "config.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "lazyadv/io.hpp"

namespace lazyadv::cli {

namespace {

using json = nlohmann::json;

class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if constexpr ((std::is_unsigned_v<T> && !std::is_same_v<T, bool>) || std::is_same_v<T, std::vector<std::uint64_t>>) {
      const bool ok = v.is_array() ? std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_unsigned(); })
                                   : v.is_number_unsigned();
      if (!ok) throw ConfigError(where_ + "." + key + ": expected non-negative integer(s)");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

DataSource parse_source(const std::string& s) {
  if (s == "synth") return DataSource::synth;
  if (s == "mnist") return DataSource::mnist;
  if (s == "cache") return DataSource::cache;
  throw ConfigError("data.source must be synth, mnist or cache");
}

std::string source_name(DataSource s) {
  switch (s) {
    case DataSource::synth: return "synth";
    case DataSource::mnist: return "mnist";
    case DataSource::cache: return "cache";
  }
  return "synth";
}

GridConfig read_grid(const json& j, const std::string& where) {
  GridConfig g;
  Section s(j, where);
  s.get("d", g.d);
  s.get("m", g.m);
  s.get("C0", g.C0);
  s.get("V", g.V);
  s.get("V_scale", g.V_scale);
  s.get("R", g.R);
  s.get("R_scale", g.R_scale);
  s.finish();
  return g;
}

json write_grid(const GridConfig& g) {
  return {{"d", g.d}, {"m", g.m}, {"C0", g.C0}, {"V", g.V}, {"V_scale", g.V_scale}, {"R", g.R}, {"R_scale", g.R_scale}};
}

json to_json(const ExperimentConfig& c) {
  json sweeps = json::array();
  for (const AdvSweep& s : c.sweeps) sweeps.push_back({{"name", s.name}, {"grid", write_grid(s.grid)}});
  const DataConfig& d = c.data;
  const TrainSection& t = c.train;
  const AttackSection& a = c.attack;
  const VerifySection& v = c.verify;
  return {
      {"data",
       {{"source", source_name(d.source)}, {"margin", d.margin}, {"margin_scale", d.margin_scale},
        {"n_train", d.n_train}, {"n_test", d.n_test}, {"seed", d.seed}, {"normalize", d.normalize},
        {"pos_digit", d.pos_digit}, {"neg_digit", d.neg_digit}, {"train_images", d.train_images},
        {"train_labels", d.train_labels}, {"test_images", d.test_images}, {"test_labels", d.test_labels},
        {"cache_dir", d.cache_dir}}},
      {"grid", write_grid(c.grid)},
      {"seeds", c.seeds},
      {"train",
       {{"lr_sgd", t.lr_sgd}, {"beta", t.beta}, {"batch_size", t.batch_size}, {"max_epochs", t.max_epochs},
        {"patience", t.patience}, {"inner_pgd_steps", t.inner_pgd_steps}, {"pgd_alpha", t.pgd_alpha},
        {"pgd_step", t.pgd_step}, {"reduction", t.reduction}}},
      {"attack",
       {{"kind", a.kind}, {"eta_max", a.eta_max}, {"budget_scale", a.budget_scale}, {"tol", a.tol},
        {"grid_points", a.grid_points}, {"grid_span", a.grid_span}, {"bisection_steps", a.bisection_steps},
        {"C2", a.C2}, {"pgd_steps", a.pgd_steps}}},
      {"verify",
       {{"gammas", v.gammas}, {"n_seeds", v.n_seeds}, {"grad_diff_probes", v.grad_diff_probes},
        {"grad_diff_R_scale", v.grad_diff_R_scale}, {"C1", v.C1}, {"sign_flip_probes", v.sign_flip_probes},
        {"sign_flip_R", v.sign_flip_R}}},
      {"sweeps", sweeps},
      {"out", c.out},
  };
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section top(root, "config");
  if (const json* j = top.child("data")) {
    Section s(*j, "data");
    std::string source = source_name(c.data.source);
    s.get("source", source);
    c.data.source = parse_source(source);
    s.get("margin", c.data.margin);
    s.get("margin_scale", c.data.margin_scale);
    s.get("n_train", c.data.n_train);
    s.get("n_test", c.data.n_test);
    s.get("seed", c.data.seed);
    s.get("normalize", c.data.normalize);
    s.get("pos_digit", c.data.pos_digit);
    s.get("neg_digit", c.data.neg_digit);
    s.get("train_images", c.data.train_images);
    s.get("train_labels", c.data.train_labels);
    s.get("test_images", c.data.test_images);
    s.get("test_labels", c.data.test_labels);
    s.get("cache_dir", c.data.cache_dir);
    s.finish();
  }
  if (const json* j = top.child("grid")) c.grid = read_grid(*j, "grid");
  top.get("seeds", c.seeds);
  if (const json* j = top.child("train")) {
    Section s(*j, "train");
    s.get("lr_sgd", c.train.lr_sgd);
    s.get("beta", c.train.beta);
    s.get("batch_size", c.train.batch_size);
    s.get("max_epochs", c.train.max_epochs);
    s.get("patience", c.train.patience);
    s.get("inner_pgd_steps", c.train.inner_pgd_steps);
    s.get("pgd_alpha", c.train.pgd_alpha);
    s.get("pgd_step", c.train.pgd_step);
    s.get("reduction", c.train.reduction);
    s.finish();
  }
  if (const json* j = top.child("attack")) {
    Section s(*j, "attack");
    s.get("kind", c.attack.kind);
    s.get("eta_max", c.attack.eta_max);
    s.get("budget_scale", c.attack.budget_scale);
    s.get("tol", c.attack.tol);
    s.get("grid_points", c.attack.grid_points);
    s.get("grid_span", c.attack.grid_span);
    s.get("bisection_steps", c.attack.bisection_steps);
    s.get("C2", c.attack.C2);
    s.get("pgd_steps", c.attack.pgd_steps);
    s.finish();
  }
  if (const json* j = top.child("verify")) {
    Section s(*j, "verify");
    s.get("gammas", c.verify.gammas);
    s.get("n_seeds", c.verify.n_seeds);
    s.get("grad_diff_probes", c.verify.grad_diff_probes);
    s.get("grad_diff_R_scale", c.verify.grad_diff_R_scale);
    s.get("C1", c.verify.C1);
    s.get("sign_flip_probes", c.verify.sign_flip_probes);
    s.get("sign_flip_R", c.verify.sign_flip_R);
    s.finish();
  }
  if (const json* j = top.child("sweeps")) {
    if (!j->is_array()) throw ConfigError("sweeps: expected an array");
    for (const json& e : *j) {
      Section s(e, "sweeps[]");
      AdvSweep sw;
      s.get("name", sw.name);
      if (const json* g = s.child("grid")) sw.grid = read_grid(*g, "sweeps[].grid");
      s.finish();
      c.sweeps.push_back(std::move(sw));
    }
  }
  top.get("out", c.out);
  top.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

std::string serialize_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("out");
  return fnv1a64(j.dump());
}

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void validate_grid(const GridConfig& g, const std::string& where) {
  for (long d : g.d) require(d >= 2, where + ".d entries must be >= 2");
  for (long m : g.m) require(m >= 1, where + ".m entries must be >= 1");
  for (double c : g.C0) require(c >= 0 && std::isfinite(c), where + ".C0 entries must be >= 0");
  for (double v : g.V) require(v >= 0 && std::isfinite(v), where + ".V entries must be >= 0");
  for (double v : g.V_scale) require(v >= 0 && std::isfinite(v), where + ".V_scale entries must be >= 0");
  for (double r : g.R) require(r > 0 && std::isfinite(r), where + ".R entries must be > 0");
  for (double r : g.R_scale) require(r > 0 && std::isfinite(r), where + ".R_scale entries must be > 0");
}

}  // namespace

void validate_config(const ExperimentConfig& c) {
  const DataConfig& d = c.data;
  require(d.margin >= 0 && d.margin < 1, "data.margin must lie in [0, 1)");
  require(d.margin_scale >= 0, "data.margin_scale must be >= 0");
  if (d.source == DataSource::synth) require(d.n_train >= 1 && d.n_test >= 1, "data.n_train and data.n_test must be >= 1");
  require(d.pos_digit != d.neg_digit && d.pos_digit >= 0 && d.pos_digit <= 9 && d.neg_digit >= 0 && d.neg_digit <= 9,
          "data digits must be distinct and in 0..9");
  if (d.source == DataSource::mnist)
    require(!d.train_images.empty() && !d.train_labels.empty() && !d.test_images.empty() && !d.test_labels.empty(),
            "mnist source needs all four IDX paths");
  if (d.source == DataSource::cache) require(!d.cache_dir.empty(), "cache source needs data.cache_dir");

  validate_grid(c.grid, "grid");
  for (const AdvSweep& s : c.sweeps) {
    require(!s.name.empty(), "sweeps need a name");
    validate_grid(s.grid, "sweeps." + s.name);
  }
  std::set<std::string> names;
  for (const AdvSweep& s : c.sweeps) require(names.insert(s.name).second, "sweep names must be distinct");
  require(std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() == c.seeds.size(), "seeds must be distinct");

  const TrainSection& t = c.train;
  require(t.lr_sgd > 0 && t.beta > 0, "train rates must be > 0");
  require(t.batch_size >= 1 && t.max_epochs >= 1 && t.inner_pgd_steps >= 1, "train sizes must be >= 1");
  require(t.patience >= 0, "train.patience must be >= 0");
  require(t.pgd_step == "plain" || t.pgd_step == "normalized", "train.pgd_step must be plain or normalized");
  require(t.reduction == "sum" || t.reduction == "mean", "train.reduction must be sum or mean");

  const AttackSection& a = c.attack;
  require(a.kind == "min_eta" || a.kind == "single_step" || a.kind == "pgd", "attack.kind must be min_eta, single_step or pgd");
  require(a.eta_max > 0 && a.tol > 0 && a.C2 > 0, "attack.eta_max, tol and C2 must be > 0");
  require(a.budget_scale >= 0, "attack.budget_scale must be >= 0");
  require(a.grid_points >= 2 && a.grid_span > 0 && a.grid_span < 1 && a.bisection_steps >= 1,
          "attack search grid is invalid");
  require(a.pgd_steps >= 1, "attack.pgd_steps must be >= 1");
  require(a.kind != "pgd" || a.budget_scale > 0, "pgd attack needs attack.budget_scale > 0");

  const VerifySection& v = c.verify;
  require(!v.gammas.empty(), "verify.gammas must be nonempty");
  for (double g : v.gammas) require(g > 0 && g < 1, "verify.gammas must lie in (0, 1)");
  require(v.n_seeds >= 1 && v.grad_diff_probes >= 1 && v.sign_flip_probes >= 1, "verify counts must be >= 1");
  require(v.grad_diff_R_scale >= 0 && v.C1 > 0, "verify.grad_diff_R_scale must be >= 0 and C1 > 0");
  require(v.sign_flip_R >= 0 && v.sign_flip_R <= 0.5, "verify.sign_flip_R must lie in [0, 1/2]");
}

}  // namespace lazyadv::cli
