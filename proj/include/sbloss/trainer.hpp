#ifndef SBLOSS_TRAINER_HPP
#define SBLOSS_TRAINER_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbloss/data.hpp"
#include "sbloss/metrics.hpp"
#include "sbloss/model.hpp"
#include "sbloss/weighting.hpp"

namespace sbloss {

struct DataSource {
  std::string preset = "speechocean";
  std::string path;  // cached split written by gen-data; overrides the preset when set
  GenerateOptions generate;
};

struct TrainConfig {
  WeightConfig weight{WeightScheme::none, 0.9};
  double lr = 1e-3;
  std::size_t batch_size = 25;
  std::size_t epochs = 100;
  std::size_t hidden = 24;
  std::size_t eval_every = 1;
  std::size_t workers = 0;  // 0: one per hardware thread
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  DataSource data;

  void validate() const;  // throws ConfigError
};

// Nested JSON: {"scheme": {...}, "train": {...}, "seeds": [...], "data": {...}}.
nlohmann::json to_json(const TrainConfig& config);
// Missing keys keep their defaults; unknown keys throw ConfigError.
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::string& path);

// Dotted-key override, e.g. "scheme.beta=0.99" or "seeds=1,2,3".
void apply_override(TrainConfig& config, const std::string& assignment);
std::vector<std::string> config_keys();

DatasetSplit load_data(const DataSource& source);

struct EpochPoint {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean batch loss over the epoch
  std::vector<std::optional<double>> test_pcc;  // per aspect, head order
};

struct RunResult {
  std::uint64_t seed = 0;
  EvalReport final_report;
  std::vector<EpochPoint> trace;
  std::vector<std::optional<double>> best_pcc;  // per aspect, over the trace
  std::vector<std::size_t> best_epoch;
  std::vector<std::string> inactive_aspects;    // no training labels
  Regressor model{RegressorShape{1, 1, 1}};
};

struct ExperimentResult {
  TrainConfig config;
  std::vector<std::string> aspects;
  std::vector<RunResult> runs;
  AggregateReport final_epoch;
  AggregateReport best_epoch;
};

// One seed. Class statistics come from split.train only and stay fixed for the run.
// Throws DivergenceError naming the epoch and batch if the loss or gradient goes non-finite.
RunResult train_run(const TrainConfig& config, const DatasetSplit& split, std::uint64_t seed);

// All seeds of the config over the same split; runs execute concurrently on up to
// config.workers threads and are collected in seed order.
ExperimentResult run_experiment(const TrainConfig& config, const DatasetSplit& split);

struct SweepRow {
  double beta = 0.0;
  ExperimentResult result;
  std::map<std::string, double> mean_weight;            // over all 11 classes
  std::map<std::string, double> mean_weight_populated;  // over non-empty classes
};

inline const std::vector<double> kDefaultBetaGrid{0.5, 0.8, 0.9, 0.99, 0.999};

// sb_num runs at each beta (the configured scheme is replaced by sb_num).
std::vector<SweepRow> sweep_beta(const TrainConfig& config, const DatasetSplit& split,
                                 std::span<const double> betas);

struct SchemeResult {
  WeightConfig weight;
  ExperimentResult result;
};

std::vector<SchemeResult> compare_schemes(const TrainConfig& config, const DatasetSplit& split,
                                          std::span<const WeightConfig> schemes);

nlohmann::json to_json(const RunResult& run, const std::vector<std::string>& aspects);
nlohmann::json to_json(const ExperimentResult& result);

// Per-epoch mean test PCC across seeds: epoch,<aspect>,... rows.
std::string trace_csv(const ExperimentResult& result);

}  // namespace sbloss

#endif  // SBLOSS_TRAINER_HPP
