#ifndef SBLOSS_METRICS_HPP
#define SBLOSS_METRICS_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbloss/scorebin.hpp"

namespace sbloss {

using Histogram = std::array<std::size_t, kNumClasses>;

// Sample Pearson correlation, two-pass. nullopt when either side has zero variance.
// Throws DomainError for fewer than 2 points or a length mismatch.
std::optional<double> pearson(std::span<const double> preds, std::span<const double> targets);

double mse(std::span<const double> preds, std::span<const double> targets);

Histogram histogram(std::span<const double> scores);

struct Summary {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double sd = 0.0;  // n - 1 denominator; 0 for a single value
};

Summary summarize(std::span<const double> values);

struct DistributionReport {
  Histogram pred_hist{};
  Histogram target_hist{};
  Summary pred;
  Summary target;
};

DistributionReport distribution_report(std::span<const double> preds, std::span<const double> targets);

struct AspectEval {
  std::string aspect;
  std::size_t count = 0;
  std::optional<double> pcc;
  double mse = 0.0;
  DistributionReport distribution;
};

// One run's evaluation over a test set.
struct EvalReport {
  std::uint64_t seed = 0;
  std::vector<AspectEval> aspects;

  const AspectEval& at(const std::string& aspect) const;
};

// preds[k] and targets[k] hold aspect k's evaluated (labelled) samples.
EvalReport evaluate(const std::vector<std::string>& aspects,
                    const std::vector<std::vector<double>>& preds,
                    const std::vector<std::vector<double>>& targets, std::uint64_t seed = 0);

struct RunStat {
  std::optional<double> mean;
  std::optional<double> std;  // sample std over runs (n - 1); needs >= 2 defined values
  std::size_t defined = 0;
};

struct AspectAggregate {
  std::string aspect;
  RunStat pcc;
  RunStat mse;
  std::size_t undefined_pcc = 0;
};

struct AggregateReport {
  std::vector<std::uint64_t> seeds;
  std::vector<AspectAggregate> aspects;

  const AspectAggregate& at(const std::string& aspect) const;
};

// Mean and n-1 standard deviation across runs; undefined PCCs are excluded and counted.
// Throws DomainError for fewer than 2 reports or differing aspect sets.
AggregateReport aggregate_runs(std::span<const EvalReport> reports);

RunStat run_stat(std::span<const double> values);

inline constexpr const char* kStdConvention = "std over runs uses the n-1 (sample) denominator";

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const AggregateReport& report);

// "0.427±0.101", or "n/a" when undefined.
std::string format_stat(const RunStat& stat, int precision = 3);

// Aligned text table: one row per aspect, one "mean±std" column per labelled report.
std::string comparison_table(const std::vector<std::string>& column_labels,
                             const std::vector<AggregateReport>& columns, const std::string& metric);

// class,lower,upper,<aspect>_pred,<aspect>_target,... one row per class.
std::string histogram_csv(const EvalReport& report);

}  // namespace sbloss

#endif  // SBLOSS_METRICS_HPP
