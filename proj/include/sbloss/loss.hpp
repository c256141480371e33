#ifndef SBLOSS_LOSS_HPP
#define SBLOSS_LOSS_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

#include "sbloss/weighting.hpp"

namespace sbloss {

// Masks are stored as bytes (0 = missing label) so they can be viewed through spans.
using Mask = std::vector<unsigned char>;

struct AspectLoss {
  double loss = 0.0;
  std::vector<double> grad;     // d loss / d pred
  std::vector<double> weights;  // per-sample weight, 0 where masked out
  bool active = false;          // false when no sample carried a label
};

// Per-sample weights for one aspect. Masked-out entries get weight 0.
std::vector<double> sample_weights(std::span<const double> preds, std::span<const double> targets,
                                   std::span<const unsigned char> mask, const ClassStats& stats,
                                   const WeightConfig& config);

// Weighted mean squared error for fixed weights: sum_i w_i (p_i - t_i)^2 / |mask|.
AspectLoss weighted_squared_error(std::span<const double> preds, std::span<const double> targets,
                                  std::span<const unsigned char> mask, std::vector<double> weights);

// sample_weights followed by weighted_squared_error. Weights are treated as constants
// with respect to preds, so grad_i = 2 w_i (p_i - t_i) / |mask|.
AspectLoss weighted_loss(std::span<const double> preds, std::span<const double> targets,
                         std::span<const unsigned char> mask, const ClassStats& stats,
                         const WeightConfig& config);

// One aspect's slice of a batch.
struct AspectBatch {
  std::string aspect;
  std::vector<double> preds;
  std::vector<double> targets;
  Mask mask;
};

using StatsTable = std::map<std::string, ClassStats>;

struct LossBreakdown {
  std::map<std::string, double> per_aspect;
  std::map<std::string, std::vector<double>> per_sample_weights;
  std::map<std::string, std::vector<double>> grads;
  std::vector<std::string> inactive;
  double total = 0.0;
};

// Sum of weighted_loss over aspects, accumulated in the order given.
LossBreakdown total_loss(std::span<const AspectBatch> batch, const StatsTable& stats,
                         const WeightConfig& config);

}  // namespace sbloss

#endif  // SBLOSS_LOSS_HPP
