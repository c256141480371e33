#ifndef SBLOSS_OBJECTIVE_HPP
#define SBLOSS_OBJECTIVE_HPP

#include <string>
#include <vector>

#include "sbloss/loss.hpp"
#include "sbloss/model.hpp"

namespace sbloss {

// A mini-batch in head order: features[sample], targets[aspect][sample], masks[aspect][sample].
struct LabelledBatch {
  std::vector<std::string> aspects;
  std::vector<std::vector<double>> features;
  std::vector<std::vector<double>> targets;
  std::vector<Mask> masks;

  std::size_t size() const { return features.size(); }
};

struct ObjectiveValue {
  LossBreakdown breakdown;
  std::vector<double> grad;  // d total / d params, same layout as Regressor::params()
};

// Forward pass over the batch, total_loss, then backprop of the per-aspect loss gradients.
ObjectiveValue evaluate_objective(const Regressor& model, const LabelledBatch& batch,
                                  const StatsTable& stats, const WeightConfig& config);

// Same forward pass, returning the loss only.
double objective_value(const Regressor& model, const LabelledBatch& batch, const StatsTable& stats,
                       const WeightConfig& config);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  // Probes whose perturbed predictions landed in a different weight bin; the
  // numeric derivative is not meaningful there.
  std::size_t boundary_crossings = 0;
};

// Central finite differences of the full loss against the analytic gradient, per parameter,
// with relative error |a - n| / max(|a|, |n|, 1e-8). Predictions should sit away from the
// 0.2 class boundaries so the piecewise-constant weights do not change inside a probe.
GradCheckResult grad_check(const Regressor& model, const LabelledBatch& batch,
                           const StatsTable& stats, const WeightConfig& config,
                           double step = 1e-6);

struct GradCheckSetup {
  Regressor model;
  LabelledBatch batch;
  StatsTable stats;
};

// Random small network, batch and class statistics for gradient checking. Every
// prediction sits at least min_gap away from a class boundary; one label per aspect
// beyond the first sample is masked out when the batch has more than two samples.
GradCheckSetup make_grad_check_setup(RegressorShape shape, std::size_t batch_size,
                                     std::uint64_t seed, double min_gap = 1e-3);

}  // namespace sbloss

#endif  // SBLOSS_OBJECTIVE_HPP
