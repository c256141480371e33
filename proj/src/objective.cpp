#include "sbloss/objective.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sbloss/error.hpp"

namespace sbloss {

namespace {

struct ForwardPass {
  std::vector<Regressor::Activations> acts;
  std::vector<AspectBatch> aspects;
};

ForwardPass run_forward(const Regressor& model, const LabelledBatch& batch) {
  const std::size_t heads = model.shape().heads;
  if (batch.aspects.size() != heads || batch.targets.size() != heads || batch.masks.size() != heads) {
    throw DomainError("batch aspect count does not match the regressor's heads");
  }
  ForwardPass pass;
  pass.acts.reserve(batch.size());
  for (const auto& x : batch.features) pass.acts.push_back(model.forward_trace(x));

  pass.aspects.resize(heads);
  for (std::size_t k = 0; k < heads; ++k) {
    auto& slice = pass.aspects[k];
    slice.aspect = batch.aspects[k];
    slice.preds.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) slice.preds[i] = pass.acts[i].output[k];
    slice.targets = batch.targets[k];
    slice.mask = batch.masks[k];
  }
  return pass;
}

std::vector<std::vector<double>> weight_snapshot(const LossBreakdown& b,
                                                 const std::vector<std::string>& aspects) {
  std::vector<std::vector<double>> out;
  for (const auto& a : aspects) out.push_back(b.per_sample_weights.at(a));
  return out;
}

}  // namespace

ObjectiveValue evaluate_objective(const Regressor& model, const LabelledBatch& batch,
                                  const StatsTable& stats, const WeightConfig& config) {
  auto pass = run_forward(model, batch);
  ObjectiveValue out;
  out.breakdown = total_loss(pass.aspects, stats, config);
  out.grad.assign(model.params().size(), 0.0);

  std::vector<double> upstream(model.shape().heads);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t k = 0; k < upstream.size(); ++k) {
      upstream[k] = out.breakdown.grads.at(batch.aspects[k])[i];
    }
    model.backward(pass.acts[i], upstream, out.grad);
  }
  return out;
}

double objective_value(const Regressor& model, const LabelledBatch& batch, const StatsTable& stats,
                       const WeightConfig& config) {
  auto pass = run_forward(model, batch);
  return total_loss(pass.aspects, stats, config).total;
}

GradCheckResult grad_check(const Regressor& model, const LabelledBatch& batch,
                           const StatsTable& stats, const WeightConfig& config, double step) {
  const auto base = evaluate_objective(model, batch, stats, config);
  const auto base_weights = weight_snapshot(base.breakdown, batch.aspects);

  Regressor probe = model;
  auto params = probe.params();
  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double saved = params[p];

    params[p] = saved + step;
    auto plus_pass = run_forward(probe, batch);
    auto plus = total_loss(plus_pass.aspects, stats, config);
    params[p] = saved - step;
    auto minus_pass = run_forward(probe, batch);
    auto minus = total_loss(minus_pass.aspects, stats, config);
    params[p] = saved;

    if (weight_snapshot(plus, batch.aspects) != base_weights ||
        weight_snapshot(minus, batch.aspects) != base_weights) {
      ++result.boundary_crossings;
    }

    const double numeric = (plus.total - minus.total) / (2.0 * step);
    const double analytic = base.grad[p];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic - numeric) / denom;
    if (err > result.max_relative_error || p == 0) {
      result.max_relative_error = err;
      result.worst_param = p;
      result.analytic = analytic;
      result.numeric = numeric;
    }
  }
  return result;
}

GradCheckSetup make_grad_check_setup(RegressorShape shape, std::size_t batch_size,
                                     std::uint64_t seed, double min_gap) {
  if (batch_size == 0) throw DomainError("grad-check batch must not be empty");
  GradCheckSetup setup{Regressor::xavier_uniform(shape, seed), {}, {}};
  // Centre the heads on the score range so predictions visit many classes.
  auto params = setup.model.params();
  for (std::size_t k = 0; k < shape.heads; ++k) params[setup.model.b3_offset() + k] = 1.0;

  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto clear_of_boundaries = [&](const std::vector<double>& preds) {
    for (double p : preds) {
      const double slots = p / kClassWidth;
      if (std::abs(slots - std::round(slots)) * kClassWidth < min_gap) return false;
    }
    return true;
  };

  auto& batch = setup.batch;
  for (std::size_t k = 0; k < shape.heads; ++k) batch.aspects.push_back("aspect" + std::to_string(k));
  batch.targets.assign(shape.heads, {});
  batch.masks.assign(shape.heads, {});
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::vector<double> x(shape.in_dim);
    for (int attempt = 0;; ++attempt) {
      for (double& v : x) v = gauss(rng);
      if (clear_of_boundaries(setup.model.forward(x))) break;
      if (attempt > 10000) throw DomainError("could not place predictions away from class boundaries");
    }
    batch.features.push_back(std::move(x));
    for (std::size_t k = 0; k < shape.heads; ++k) {
      batch.targets[k].push_back(kMaxScore * unit(rng));
      batch.masks[k].push_back(1);
    }
  }
  if (batch_size > 2) {
    for (std::size_t k = 0; k < shape.heads; ++k) batch.masks[k][1 + k % (batch_size - 1)] = 0;
  }

  std::uniform_int_distribution<std::size_t> count(0, 40);
  for (std::size_t k = 0; k < shape.heads; ++k) {
    ClassStats::Counts counts{};
    for (auto& c : counts) c = unit(rng) < 0.2 ? 0 : count(rng);
    setup.stats.emplace(batch.aspects[k], ClassStats(AspectSpec(batch.aspects[k], Level::utterance), counts));
  }
  return setup;
}

}  // namespace sbloss
