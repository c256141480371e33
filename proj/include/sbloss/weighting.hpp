#ifndef SBLOSS_WEIGHTING_HPP
#define SBLOSS_WEIGHTING_HPP

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sbloss/scorebin.hpp"

namespace sbloss {

enum class WeightScheme { none, sb_num, sb_rank, sb_num_nopred };

const char* to_string(WeightScheme scheme);
WeightScheme scheme_from_string(const std::string& name);

struct WeightConfig {
  WeightScheme scheme = WeightScheme::none;
  double beta = 0.9;  // unused by sb_rank and none

  WeightConfig() = default;
  WeightConfig(WeightScheme scheme, double beta = 0.9);
};

// Per-aspect class histogram over the training labels plus its tie-averaged ranks.
// Rank 1 goes to the smallest count, so rare classes carry the largest rank weight.
class ClassStats {
 public:
  using Counts = std::array<std::size_t, kNumClasses>;
  using Ranks = std::array<double, kNumClasses>;

  ClassStats() = default;
  ClassStats(AspectSpec aspect, const Counts& counts);

  const AspectSpec& aspect() const { return aspect_; }
  const Counts& counts() const { return counts_; }
  const Ranks& ranks() const { return ranks_; }
  const Ranks& normalized_ranks() const { return normalized_; }
  std::size_t total() const;
  std::size_t count(ScoreClass c) const { return counts_.at(c.index); }

 private:
  AspectSpec aspect_;
  Counts counts_{};
  Ranks ranks_{};
  Ranks normalized_{};
};

// labels must already be rescaled to [0, 2]. Throws DomainError for an empty list.
ClassStats compute_class_stats(std::span<const double> labels, const AspectSpec& aspect);

// Ascending ranks with the average-rank policy for ties, for any number of classes.
std::vector<double> average_ranks(std::span<const std::size_t> counts);

// (1 - beta^n) / (1 - beta); 0 for n = 0.
double effective_number(std::size_t n, double beta);

// alpha = (1 - beta) / (1 - beta^n) for n > 0, exactly 1 for an empty class.
double sb_num_weight(std::size_t n, double beta);

// gamma = 1 / normalized_rank; in [1, 11].
double sb_rank_weight(const ClassStats& stats, std::size_t class_index);

// Inverse of rank / ranks.size(); the general form of sb_rank_weight for any lattice size.
double inverse_normalized_rank(std::span<const double> ranks, std::size_t class_index);

// Mean of sb_num_weight(counts[k], beta) over all 11 classes, empty classes included.
double mean_sb_num_weight(const ClassStats& stats, double beta);

// Mean over the classes with at least one sample.
double mean_sb_num_weight_populated(const ClassStats& stats, double beta);

}  // namespace sbloss

#endif  // SBLOSS_WEIGHTING_HPP
