#include "sbloss/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "sbloss/error.hpp"
#include "sbloss/objective.hpp"

namespace sbloss {

using json = nlohmann::json;

namespace {

// Shuffle stream is kept apart from the initialization stream of the same seed.
constexpr std::uint64_t kShuffleSalt = 0x9E3779B97F4A7C15ULL;

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "scheme.name",        "scheme.beta",     "train.lr",        "train.batch_size",
      "train.epochs",       "train.hidden",    "train.eval_every", "train.workers",
      "seeds",              "data.preset",     "data.path",       "data.n",
      "data.in_dim",        "data.noise_sd",   "data.seed",       "data.test_fraction",
      "data.mixing",
  };
  return keys;
}

std::string key_list() {
  std::string out;
  for (const auto& k : known_keys()) out += (out.empty() ? "" : ", ") + k;
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    try {
      seeds.push_back(std::stoull(item, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("bad seed '" + item + "'");
  }
  if (seeds.empty()) throw ConfigError("empty seed list");
  return seeds;
}

LabelledBatch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  LabelledBatch batch;
  batch.aspects = ds.aspect_names();
  const std::size_t m = ds.aspects.size();
  batch.targets.assign(m, std::vector<double>(indices.size()));
  batch.masks.assign(m, Mask(indices.size()));
  batch.features.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& s = ds.samples[indices[i]];
    batch.features.push_back(s.features);
    for (std::size_t k = 0; k < m; ++k) {
      batch.targets[k][i] = s.targets[k];
      batch.masks[k][i] = s.present[k];
    }
  }
  return batch;
}

struct Predictions {
  std::vector<std::vector<double>> preds;    // [aspect][labelled sample]
  std::vector<std::vector<double>> targets;  // [aspect][labelled sample]
};

Predictions predict(const Regressor& model, const Dataset& ds) {
  const std::size_t m = ds.aspects.size();
  Predictions out;
  out.preds.resize(m);
  out.targets.resize(m);
  for (const auto& s : ds.samples) {
    const auto y = model.forward(s.features);
    for (std::size_t k = 0; k < m; ++k) {
      if (!s.present[k]) continue;
      out.preds[k].push_back(y[k]);
      out.targets[k].push_back(s.targets[k]);
    }
  }
  return out;
}

std::vector<std::optional<double>> pcc_per_aspect(const Predictions& p) {
  std::vector<std::optional<double>> out;
  for (std::size_t k = 0; k < p.preds.size(); ++k) {
    out.push_back(p.preds[k].size() >= 2 ? pearson(p.preds[k], p.targets[k]) : std::nullopt);
  }
  return out;
}

AggregateReport aggregate_best(const std::vector<RunResult>& runs, const std::vector<std::string>& aspects) {
  AggregateReport out;
  for (const auto& r : runs) out.seeds.push_back(r.seed);
  for (std::size_t k = 0; k < aspects.size(); ++k) {
    AspectAggregate agg;
    agg.aspect = aspects[k];
    std::vector<double> values;
    for (const auto& r : runs) {
      if (r.best_pcc[k]) {
        values.push_back(*r.best_pcc[k]);
      } else {
        ++agg.undefined_pcc;
      }
    }
    agg.pcc = run_stat(values);
    out.aspects.push_back(std::move(agg));
  }
  return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (hidden == 0) throw ConfigError("train.hidden must be positive");
  if (eval_every == 0) throw ConfigError("train.eval_every must be positive");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (!(weight.beta >= 0.0 && weight.beta < 1.0)) throw ConfigError("scheme.beta must lie in [0, 1)");
  if (data.path.empty() && data.preset != "speechocean" && data.preset != "balanced") {
    throw ConfigError("data.preset must be speechocean or balanced");
  }
}

json to_json(const TrainConfig& c) {
  return {
      {"scheme", {{"name", to_string(c.weight.scheme)}, {"beta", c.weight.beta}}},
      {"train",
       {{"lr", c.lr},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"hidden", c.hidden},
        {"eval_every", c.eval_every},
        {"workers", c.workers}}},
      {"seeds", c.seeds},
      {"data",
       {{"preset", c.data.preset},
        {"path", c.data.path},
        {"n", c.data.generate.n},
        {"in_dim", c.data.generate.in_dim},
        {"noise_sd", c.data.generate.noise_sd},
        {"seed", c.data.generate.seed},
        {"test_fraction", c.data.generate.test_fraction},
        {"mixing", to_string(c.data.generate.mixing)}}},
  };
}

TrainConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  // Merge onto the defaults so every field keeps its type.
  json merged = to_json(TrainConfig{});
  for (const auto& [section, value] : j.items()) {
    if (!merged.contains(section)) throw ConfigError("unknown config key '" + section + "'; valid keys: " + key_list());
    if (merged[section].is_object()) {
      if (!value.is_object()) throw ConfigError("config section '" + section + "' must be an object");
      for (const auto& [key, v] : value.items()) {
        if (!merged[section].contains(key)) {
          throw ConfigError("unknown config key '" + section + "." + key + "'; valid keys: " + key_list());
        }
        merged[section][key] = v;
      }
    } else {
      merged[section] = value;
    }
  }

  TrainConfig c;
  try {
    const auto& s = merged.at("scheme");
    c.weight.scheme = scheme_from_string(s.at("name").get<std::string>());
    c.weight.beta = s.at("beta").get<double>();
    const auto& t = merged.at("train");
    c.lr = t.at("lr").get<double>();
    c.batch_size = t.at("batch_size").get<std::size_t>();
    c.epochs = t.at("epochs").get<std::size_t>();
    c.hidden = t.at("hidden").get<std::size_t>();
    c.eval_every = t.at("eval_every").get<std::size_t>();
    c.workers = t.at("workers").get<std::size_t>();
    c.seeds = merged.at("seeds").get<std::vector<std::uint64_t>>();
    const auto& d = merged.at("data");
    c.data.preset = d.at("preset").get<std::string>();
    c.data.path = d.at("path").get<std::string>();
    c.data.generate.n = d.at("n").get<std::size_t>();
    c.data.generate.in_dim = d.at("in_dim").get<std::size_t>();
    c.data.generate.noise_sd = d.at("noise_sd").get<double>();
    c.data.generate.seed = d.at("seed").get<std::uint64_t>();
    c.data.generate.test_fraction = d.at("test_fraction").get<double>();
    c.data.generate.mixing = mixing_from_string(d.at("mixing").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::vector<std::string> config_keys() { return known_keys(); }

void apply_override(TrainConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not KEY=VALUE");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
    throw ConfigError("unknown override key '" + key + "'; valid keys: " + key_list());
  }

  json j = to_json(config);
  if (key == "seeds") {
    j["seeds"] = parse_seed_list(value);
  } else {
    const auto dot = key.find('.');
    json& slot = j[key.substr(0, dot)][key.substr(dot + 1)];
    if (slot.is_string()) {
      slot = value;
    } else {
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const json::parse_error&) {
        throw ConfigError("override '" + key + "': cannot parse '" + value + "'");
      }
      if (slot.is_number_unsigned() && !parsed.is_number_unsigned()) {
        throw ConfigError("override '" + key + "' expects a non-negative integer");
      }
      if (slot.is_number_float() && !parsed.is_number()) {
        throw ConfigError("override '" + key + "' expects a number");
      }
      slot = parsed;
    }
  }
  config = config_from_json(j);
}

DatasetSplit load_data(const DataSource& source) {
  if (!source.path.empty()) return load_split(source.path);
  return generate(preset_by_name(source.preset), source.generate);
}

RunResult train_run(const TrainConfig& config, const DatasetSplit& split, std::uint64_t seed) {
  config.validate();
  const Dataset& train = split.train;
  if (train.size() == 0) throw DomainError("training split is empty");
  if (split.test.aspects != train.aspects || split.test.in_dim != train.in_dim) {
    throw DomainError("train and test splits disagree on aspects or feature width");
  }

  RunResult result;
  result.seed = seed;
  const auto aspects = train.aspect_names();

  StatsTable stats = train.class_stats();
  for (const auto& a : train.aspects) {
    if (!stats.count(a.name)) {
      result.inactive_aspects.push_back(a.name);
      stats.emplace(a.name, ClassStats(a, ClassStats::Counts{}));
    }
  }

  const RegressorShape shape{train.in_dim, config.hidden, aspects.size()};
  Regressor model = Regressor::xavier_uniform(shape, seed);
  Adam adam(shape.param_count(), AdamOptions{config.lr});
  std::mt19937_64 shuffle_rng(seed ^ kShuffleSalt);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  result.best_pcc.assign(aspects.size(), std::nullopt);
  result.best_epoch.assign(aspects.size(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const auto batch = make_batch(train, std::span(order).subspan(start, end - start));
      const auto value = evaluate_objective(model, batch, stats, config.weight);
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches + 1);
      if (!std::isfinite(value.breakdown.total)) throw DivergenceError("non-finite loss at " + where);
      try {
        adam.step(model.params(), value.grad);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at " + where);
      }
      loss_sum += value.breakdown.total;
      ++batches;
    }

    if (epoch % config.eval_every == 0) {
      EpochPoint point;
      point.epoch = epoch;
      point.train_loss = loss_sum / static_cast<double>(batches);
      point.test_pcc = pcc_per_aspect(predict(model, split.test));
      for (std::size_t k = 0; k < aspects.size(); ++k) {
        const auto& p = point.test_pcc[k];
        if (p && (!result.best_pcc[k] || *p > *result.best_pcc[k])) {
          result.best_pcc[k] = p;
          result.best_epoch[k] = epoch;
        }
      }
      result.trace.push_back(std::move(point));
    }
  }

  const auto final_preds = predict(model, split.test);
  result.final_report = evaluate(aspects, final_preds.preds, final_preds.targets, seed);
  result.model = std::move(model);
  return result;
}

ExperimentResult run_experiment(const TrainConfig& config, const DatasetSplit& split) {
  config.validate();
  ExperimentResult out;
  out.config = config;
  out.aspects = split.train.aspect_names();

  std::size_t workers = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, config.seeds.size());
  out.runs.resize(config.seeds.size());
  // Each slot runs its share of seeds in order; results land at the seed's index.
  std::vector<std::future<void>> slots;
  for (std::size_t w = 0; w < workers; ++w) {
    slots.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < config.seeds.size(); i += workers) {
        out.runs[i] = train_run(config, split, config.seeds[i]);
      }
    }));
  }
  for (auto& s : slots) s.get();

  if (out.runs.size() >= 2) {
    std::vector<EvalReport> reports;
    for (const auto& r : out.runs) reports.push_back(r.final_report);
    out.final_epoch = aggregate_runs(reports);
  } else {
    out.final_epoch.seeds = {out.runs[0].seed};
    for (const auto& e : out.runs[0].final_report.aspects) {
      AspectAggregate agg;
      agg.aspect = e.aspect;
      std::vector<double> pcc;
      if (e.pcc) pcc.push_back(*e.pcc);
      agg.undefined_pcc = e.pcc ? 0 : 1;
      agg.pcc = run_stat(pcc);
      std::vector<double> m{e.mse};
      agg.mse = run_stat(m);
      out.final_epoch.aspects.push_back(std::move(agg));
    }
  }
  out.best_epoch = aggregate_best(out.runs, out.aspects);
  return out;
}

std::vector<SweepRow> sweep_beta(const TrainConfig& config, const DatasetSplit& split,
                                 std::span<const double> betas) {
  const StatsTable stats = split.train.class_stats();
  std::vector<SweepRow> rows;
  for (double beta : betas) {
    if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("sweep beta " + std::to_string(beta) + " outside [0, 1)");
    TrainConfig c = config;
    c.weight = WeightConfig(WeightScheme::sb_num, beta);
    SweepRow row;
    row.beta = beta;
    row.result = run_experiment(c, split);
    for (const auto& [name, s] : stats) {
      row.mean_weight[name] = mean_sb_num_weight(s, beta);
      row.mean_weight_populated[name] = mean_sb_num_weight_populated(s, beta);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SchemeResult> compare_schemes(const TrainConfig& config, const DatasetSplit& split,
                                          std::span<const WeightConfig> schemes) {
  if (schemes.size() < 2) throw ConfigError("compare needs at least two schemes");
  std::vector<SchemeResult> out;
  for (const auto& w : schemes) {
    TrainConfig c = config;
    c.weight = w;
    out.push_back(SchemeResult{w, run_experiment(c, split)});
  }
  return out;
}

json to_json(const RunResult& run, const std::vector<std::string>& aspects) {
  json trace = json::array();
  for (const auto& p : run.trace) {
    json pcc = json::object();
    for (std::size_t k = 0; k < aspects.size(); ++k) pcc[aspects[k]] = optional_json(p.test_pcc[k]);
    trace.push_back({{"epoch", p.epoch}, {"train_loss", p.train_loss}, {"test_pcc", pcc}});
  }
  json best = json::object();
  for (std::size_t k = 0; k < aspects.size(); ++k) {
    best[aspects[k]] = {{"pcc", optional_json(run.best_pcc[k])}, {"epoch", run.best_epoch[k]}};
  }
  return {{"seed", run.seed},
          {"final", to_json(run.final_report)},
          {"best_epoch", best},
          {"inactive_aspects", run.inactive_aspects},
          {"trace", trace}};
}

json to_json(const ExperimentResult& result) {
  json runs = json::array();
  for (const auto& r : result.runs) runs.push_back(to_json(r, result.aspects));
  return {{"config", to_json(result.config)},
          {"aspects", result.aspects},
          {"final_epoch", to_json(result.final_epoch)},
          {"best_epoch", to_json(result.best_epoch)},
          {"runs", runs}};
}

std::string trace_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "epoch";
  for (const auto& a : result.aspects) out << ',' << a;
  out << '\n';
  if (result.runs.empty()) return out.str();
  const std::size_t points = result.runs.front().trace.size();
  out.precision(6);
  for (std::size_t t = 0; t < points; ++t) {
    out << result.runs.front().trace[t].epoch;
    for (std::size_t k = 0; k < result.aspects.size(); ++k) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& r : result.runs) {
        if (const auto& p = r.trace[t].test_pcc[k]) {
          sum += *p;
          ++n;
        }
      }
      out << ',';
      if (n) out << sum / static_cast<double>(n);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace sbloss
