#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sbloss/error.hpp"
#include "sbloss/loss.hpp"

using namespace sbloss;

namespace {

const AspectSpec kAspect("Completeness", Level::utterance);

ClassStats skewed_stats() {
  // class 10 holds the majority; classes 0, 1, 3, 6 are empty
  return ClassStats(kAspect, ClassStats::Counts{0, 0, 4, 0, 9, 15, 0, 40, 80, 120, 2000});
}

double shift_off_boundary(double p) {
  const double slots = p * 5.0;
  const double gap = std::abs(slots - std::round(slots)) / 5.0;
  return gap < 1e-3 ? p + 2e-3 : p;
}

}  // namespace

TEST_CASE("zero residual gives zero loss and gradient under every scheme") {
  const std::vector<double> y{0.1, 0.7, 1.3, 2.0};
  const Mask mask{1, 1, 1, 1};
  for (auto s : {WeightScheme::none, WeightScheme::sb_num, WeightScheme::sb_rank, WeightScheme::sb_num_nopred}) {
    const auto out = weighted_loss(y, y, mask, skewed_stats(), WeightConfig(s, 0.9));
    CHECK(out.loss == 0.0);
    for (double g : out.grad) CHECK(g == 0.0);
    CHECK(out.active);
  }
}

TEST_CASE("scheme none is plain mean squared error") {
  const std::vector<double> preds{1.5, 0.5};
  const std::vector<double> targets{0.5, 1.5};
  const auto out = weighted_loss(preds, targets, Mask{1, 1}, skewed_stats(), WeightConfig{});
  CHECK(out.loss == doctest::Approx(1.0));
  CHECK(out.grad[0] == doctest::Approx(1.0));
  CHECK(out.grad[1] == doctest::Approx(-1.0));
  CHECK(out.weights == std::vector<double>{1.0, 1.0});
}

TEST_CASE("sb_num uses the otherwise-branch for an empty predicted class") {
  const std::vector<double> preds{0.1};
  const std::vector<double> targets{0.5};
  const auto out = weighted_loss(preds, targets, Mask{1}, skewed_stats(), WeightConfig(WeightScheme::sb_num, 0.9));
  CHECK(out.weights[0] == 1.0);
  CHECK(out.loss == doctest::Approx(0.16));
  CHECK(out.grad[0] == doctest::Approx(-0.8));
}

TEST_CASE("sb_num weight follows the predicted class") {
  const auto stats = skewed_stats();
  const std::vector<double> preds{2.05, 1.95, 0.45, 1.0};
  const std::vector<double> targets{2.0, 2.0, 2.0, 2.0};
  const auto out = weighted_loss(preds, targets, Mask{1, 1, 1, 1}, stats, WeightConfig(WeightScheme::sb_num, 0.9));
  CHECK(out.weights[0] == doctest::Approx(sb_num_weight(2000, 0.9)));
  CHECK(out.weights[1] == doctest::Approx(sb_num_weight(120, 0.9)));
  CHECK(out.weights[2] == doctest::Approx(sb_num_weight(4, 0.9)));
  CHECK(out.weights[3] == doctest::Approx(sb_num_weight(15, 0.9)));
}

TEST_CASE("sb_rank weight follows the predicted class") {
  const auto stats = skewed_stats();
  const std::vector<double> preds{2.3, 0.05};
  const std::vector<double> targets{1.0, 1.0};
  const auto out = weighted_loss(preds, targets, Mask{1, 1}, stats, WeightConfig(WeightScheme::sb_rank));
  CHECK(out.weights[0] == doctest::Approx(1.0));  // unique majority
  CHECK(out.weights[1] == doctest::Approx(sb_rank_weight(stats, 0)));
  CHECK(out.weights[1] > out.weights[0]);
}

TEST_CASE("sb_num_nopred weights depend on targets only") {
  const auto stats = skewed_stats();
  const std::vector<double> targets{2.0, 0.45, 1.5, 1.9};
  const Mask mask{1, 1, 1, 1};
  const WeightConfig cfg(WeightScheme::sb_num_nopred, 0.9);
  const auto a = weighted_loss(std::vector<double>{0.1, 0.2, 0.3, 0.4}, targets, mask, stats, cfg);
  const auto b = weighted_loss(std::vector<double>{1.9, -3.0, 2.5, 0.0}, targets, mask, stats, cfg);
  CHECK(a.weights == b.weights);
  CHECK(a.weights[0] == doctest::Approx(sb_num_weight(2000, 0.9)));
}

TEST_CASE("masked entries contribute nothing") {
  const std::vector<double> preds{1.0, 5.0, 0.0};
  const std::vector<double> targets{0.0, 0.0, 0.0};
  const auto out = weighted_loss(preds, targets, Mask{1, 0, 1}, skewed_stats(), WeightConfig{});
  CHECK(out.loss == doctest::Approx(0.5));
  CHECK(out.grad[1] == 0.0);
  CHECK(out.weights[1] == 0.0);
}

TEST_CASE("all-false mask marks the aspect inactive") {
  const std::vector<double> preds{1.0, 2.0};
  const auto out = weighted_loss(preds, preds, Mask{0, 0}, skewed_stats(), WeightConfig(WeightScheme::sb_num, 0.9));
  CHECK_FALSE(out.active);
  CHECK(out.loss == 0.0);
  CHECK(out.grad == std::vector<double>{0.0, 0.0});
}

TEST_CASE("length mismatch is a domain error") {
  const std::vector<double> a{1.0, 2.0};
  const std::vector<double> b{1.0};
  CHECK_THROWS_AS(weighted_loss(a, b, Mask{1, 1}, skewed_stats(), WeightConfig{}), DomainError);
  CHECK_THROWS_AS(weighted_loss(a, a, Mask{1}, skewed_stats(), WeightConfig{}), DomainError);
}

TEST_CASE("weights are positive and scheme none weights are exactly one") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> score(-0.5, 2.5);
  std::vector<double> preds(200), targets(200);
  for (auto& p : preds) p = score(rng);
  for (auto& t : targets) t = std::clamp(score(rng), 0.0, 2.0);
  const Mask mask(200, 1);
  for (auto s : {WeightScheme::none, WeightScheme::sb_num, WeightScheme::sb_rank, WeightScheme::sb_num_nopred}) {
    for (double w : sample_weights(preds, targets, mask, skewed_stats(), WeightConfig(s, 0.9))) {
      REQUIRE(w > 0.0);
      if (s == WeightScheme::none) REQUIRE(w == 1.0);
    }
  }
}

TEST_CASE("moving a prediction from the majority bin to an empty bin raises its weight") {
  const auto stats = skewed_stats();
  const std::vector<double> targets{1.0};
  const WeightConfig cfg(WeightScheme::sb_num, 0.9);
  const double majority = sample_weights(std::vector<double>{2.1}, targets, Mask{1}, stats, cfg)[0];
  const double empty = sample_weights(std::vector<double>{0.7}, targets, Mask{1}, stats, cfg)[0];
  CHECK(majority == doctest::Approx((1.0 - 0.9) / (1.0 - std::pow(0.9, 2000))));
  CHECK(empty == 1.0);
  CHECK(empty > majority);
}

TEST_CASE("scaling the weights scales loss and gradient") {
  const std::vector<double> preds{0.3, 1.1, 1.7};
  const std::vector<double> targets{0.9, 1.0, 2.0};
  const Mask mask{1, 1, 1};
  const std::vector<double> w{0.2, 1.0, 0.5};
  std::vector<double> w3 = w;
  for (auto& x : w3) x *= 3.0;
  const auto a = weighted_squared_error(preds, targets, mask, w);
  const auto b = weighted_squared_error(preds, targets, mask, w3);
  CHECK(b.loss == doctest::Approx(3.0 * a.loss));
  for (std::size_t i = 0; i < 3; ++i) CHECK(b.grad[i] == doctest::Approx(3.0 * a.grad[i]));
}

TEST_CASE("analytic gradient matches central finite differences with weights held fixed") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> score(0.0, 2.0);
  const auto stats = skewed_stats();
  for (auto s : {WeightScheme::none, WeightScheme::sb_num, WeightScheme::sb_rank, WeightScheme::sb_num_nopred}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> preds(6), targets(6);
      for (auto& p : preds) p = shift_off_boundary(score(rng));
      for (auto& t : targets) t = score(rng);
      const Mask mask{1, 1, 0, 1, 1, 1};
      const WeightConfig cfg(s, 0.9);
      const auto base = weighted_loss(preds, targets, mask, stats, cfg);
      const double h = 1e-6;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        auto up = preds, down = preds;
        up[i] += h;
        down[i] -= h;
        const auto lu = weighted_squared_error(up, targets, mask, base.weights).loss;
        const auto ld = weighted_squared_error(down, targets, mask, base.weights).loss;
        // the evaluated weights do not move inside the probe
        REQUIRE(sample_weights(up, targets, mask, stats, cfg) == base.weights);
        const double numeric = (lu - ld) / (2.0 * h);
        const double denom = std::max({std::abs(numeric), std::abs(base.grad[i]), 1e-8});
        REQUIRE(std::abs(numeric - base.grad[i]) / denom < 1e-5);
      }
    }
  }
}

TEST_CASE("total_loss sums aspects") {
  const AspectSpec b("B", Level::word);
  StatsTable stats{{"A", ClassStats(AspectSpec("A", Level::utterance), ClassStats::Counts{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1})},
                   {"B", ClassStats(b, ClassStats::Counts{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1})}};
  std::vector<AspectBatch> batch{
      {"A", {1.5, 0.5}, {1.0, 1.0}, {1, 1}},   // mse 0.25
      {"B", {0.3, 1.3}, {0.0, 1.0}, {1, 1}},   // mse 0.09
  };
  const auto out = total_loss(batch, stats, WeightConfig{});
  const double independent = ((0.5 * 0.5) + (0.5 * 0.5)) / 2.0 + ((0.3 * 0.3) + (0.3 * 0.3)) / 2.0;
  CHECK(out.per_aspect.at("A") == doctest::Approx(0.25));
  CHECK(out.per_aspect.at("B") == doctest::Approx(0.09));
  CHECK(out.total == doctest::Approx(0.34));
  CHECK(out.total == doctest::Approx(independent));

  // a single aspect reduces to weighted_loss
  const WeightConfig cfg(WeightScheme::sb_num, 0.9);
  const auto one = total_loss(std::span(batch).first(1), stats, cfg);
  const auto direct = weighted_loss(batch[0].preds, batch[0].targets, batch[0].mask, stats.at("A"), cfg);
  CHECK(one.total == direct.loss);
  CHECK(one.grads.at("A") == direct.grad);

  batch[1].aspect = "C";
  CHECK_THROWS_AS(total_loss(batch, stats, WeightConfig{}), DomainError);
}

TEST_CASE("total_loss reports inactive aspects") {
  StatsTable stats{{"A", skewed_stats()}};
  std::vector<AspectBatch> batch{{"A", {1.0, 1.0}, {0.0, 0.0}, {0, 0}}};
  const auto out = total_loss(batch, stats, WeightConfig{});
  CHECK(out.inactive == std::vector<std::string>{"A"});
  CHECK(out.total == 0.0);
}
