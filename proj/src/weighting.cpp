#include "sbloss/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sbloss/error.hpp"

namespace sbloss {

namespace {

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw DomainError("beta must lie in [0, 1), got " + std::to_string(beta));
  }
}

}  // namespace

const char* to_string(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::none:
      return "none";
    case WeightScheme::sb_num:
      return "sb_num";
    case WeightScheme::sb_rank:
      return "sb_rank";
    case WeightScheme::sb_num_nopred:
      return "sb_num_nopred";
  }
  return "unknown";
}

WeightScheme scheme_from_string(const std::string& name) {
  if (name == "none" || name == "mse") return WeightScheme::none;
  if (name == "sb_num") return WeightScheme::sb_num;
  if (name == "sb_rank") return WeightScheme::sb_rank;
  if (name == "sb_num_nopred") return WeightScheme::sb_num_nopred;
  throw DomainError("unknown weighting scheme '" + name +
                    "' (expected none, sb_num, sb_rank or sb_num_nopred)");
}

WeightConfig::WeightConfig(WeightScheme scheme_, double beta_) : scheme(scheme_), beta(beta_) {
  check_beta(beta);
}

std::vector<double> average_ranks(std::span<const std::size_t> counts) {
  const std::size_t n = counts.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] < counts[b]; });

  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && counts[order[j + 1]] == counts[order[i]]) ++j;
    // positions i..j (0-based) share ranks i+1..j+1
    const double rank = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

ClassStats::ClassStats(AspectSpec aspect, const Counts& counts)
    : aspect_(std::move(aspect)), counts_(counts) {
  const auto ranks = average_ranks(counts_);
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    ranks_[k] = ranks[k];
    normalized_[k] = ranks[k] / static_cast<double>(kNumClasses);
  }
}

std::size_t ClassStats::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

ClassStats compute_class_stats(std::span<const double> labels, const AspectSpec& aspect) {
  if (labels.empty()) {
    throw DomainError("aspect '" + aspect.name + "': no labels to compute class statistics");
  }
  ClassStats::Counts counts{};
  for (double y : labels) ++counts[bin_of(y).index];
  return ClassStats(aspect, counts);
}

double effective_number(std::size_t n, double beta) {
  check_beta(beta);
  if (n == 0) return 0.0;
  if (beta == 0.0) return 1.0;
  // -expm1(n log beta) keeps precision when beta^n is close to 1
  const double numerator = -std::expm1(static_cast<double>(n) * std::log(beta));
  return numerator / (1.0 - beta);
}

double sb_num_weight(std::size_t n, double beta) {
  check_beta(beta);
  if (n == 0) return 1.0;
  return 1.0 / effective_number(n, beta);
}

double inverse_normalized_rank(std::span<const double> ranks, std::size_t class_index) {
  if (class_index >= ranks.size()) {
    throw DomainError("class index " + std::to_string(class_index) + " out of range");
  }
  return static_cast<double>(ranks.size()) / ranks[class_index];
}

double sb_rank_weight(const ClassStats& stats, std::size_t class_index) {
  if (class_index >= kNumClasses) {
    throw DomainError("class index " + std::to_string(class_index) + " out of range");
  }
  return 1.0 / stats.normalized_ranks()[class_index];
}

double mean_sb_num_weight(const ClassStats& stats, double beta) {
  double sum = 0.0;
  for (std::size_t n : stats.counts()) sum += sb_num_weight(n, beta);
  return sum / static_cast<double>(kNumClasses);
}

double mean_sb_num_weight_populated(const ClassStats& stats, double beta) {
  double sum = 0.0;
  std::size_t populated = 0;
  for (std::size_t n : stats.counts()) {
    if (n == 0) continue;
    sum += sb_num_weight(n, beta);
    ++populated;
  }
  return populated ? sum / static_cast<double>(populated) : 1.0;
}

}  // namespace sbloss
