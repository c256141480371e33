#include "sbloss/loss.hpp"

#include "sbloss/error.hpp"

namespace sbloss {

namespace {

void check_lengths(std::size_t preds, std::size_t targets, std::size_t mask) {
  if (preds != targets || preds != mask) {
    throw DomainError("loss: length mismatch (preds " + std::to_string(preds) + ", targets " +
                      std::to_string(targets) + ", mask " + std::to_string(mask) + ")");
  }
}

}  // namespace

std::vector<double> sample_weights(std::span<const double> preds, std::span<const double> targets,
                                   std::span<const unsigned char> mask, const ClassStats& stats,
                                   const WeightConfig& config) {
  check_lengths(preds.size(), targets.size(), mask.size());
  std::vector<double> weights(preds.size(), 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!mask[i]) continue;
    switch (config.scheme) {
      case WeightScheme::none:
        weights[i] = 1.0;
        break;
      case WeightScheme::sb_num:
        weights[i] = sb_num_weight(stats.count(bin_of(preds[i])), config.beta);
        break;
      case WeightScheme::sb_rank:
        weights[i] = sb_rank_weight(stats, bin_of(preds[i]).index);
        break;
      case WeightScheme::sb_num_nopred:
        weights[i] = sb_num_weight(stats.count(bin_of(targets[i])), config.beta);
        break;
    }
  }
  return weights;
}

AspectLoss weighted_squared_error(std::span<const double> preds, std::span<const double> targets,
                                  std::span<const unsigned char> mask, std::vector<double> weights) {
  check_lengths(preds.size(), targets.size(), mask.size());
  if (weights.size() != preds.size()) throw DomainError("loss: weight array length mismatch");

  AspectLoss out;
  out.grad.assign(preds.size(), 0.0);
  std::size_t labelled = 0;
  for (unsigned char m : mask) labelled += m ? 1 : 0;
  if (labelled == 0) {
    out.weights.assign(preds.size(), 0.0);
    return out;
  }

  const double scale = 1.0 / static_cast<double>(labelled);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!mask[i]) {
      weights[i] = 0.0;
      continue;
    }
    const double residual = preds[i] - targets[i];
    sum += weights[i] * residual * residual;
    out.grad[i] = 2.0 * weights[i] * residual * scale;
  }
  out.loss = sum * scale;
  out.weights = std::move(weights);
  out.active = true;
  return out;
}

AspectLoss weighted_loss(std::span<const double> preds, std::span<const double> targets,
                         std::span<const unsigned char> mask, const ClassStats& stats,
                         const WeightConfig& config) {
  auto weights = sample_weights(preds, targets, mask, stats, config);
  return weighted_squared_error(preds, targets, mask, std::move(weights));
}

LossBreakdown total_loss(std::span<const AspectBatch> batch, const StatsTable& stats,
                         const WeightConfig& config) {
  LossBreakdown out;
  for (const auto& aspect : batch) {
    auto it = stats.find(aspect.aspect);
    if (it == stats.end()) throw DomainError("loss: unknown aspect '" + aspect.aspect + "'");
    auto part = weighted_loss(aspect.preds, aspect.targets, aspect.mask, it->second, config);
    if (!part.active) out.inactive.push_back(aspect.aspect);
    out.total += part.loss;
    out.per_aspect[aspect.aspect] = part.loss;
    out.per_sample_weights[aspect.aspect] = std::move(part.weights);
    out.grads[aspect.aspect] = std::move(part.grad);
  }
  return out;
}

}  // namespace sbloss
