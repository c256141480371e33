#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sbloss/error.hpp"
#include "sbloss/trainer.hpp"

using namespace sbloss;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 6;
  c.hidden = 8;
  c.seeds = {1, 2};
  c.workers = 1;
  c.data.generate.n = 400;
  c.data.generate.in_dim = 8;
  return c;
}

}  // namespace

TEST_CASE("plain MSE learns a balanced noiseless dataset almost perfectly") {
  TrainConfig c;
  c.data.preset = "balanced";
  c.data.generate.noise_sd = 0.0;
  c.seeds = {1};
  const auto split = load_data(c.data);
  const auto run = train_run(c, split, 1);
  for (const auto& a : run.final_report.aspects) {
    INFO(a.aspect);
    REQUIRE(a.pcc.has_value());
    CHECK(*a.pcc > 0.99);
  }
}

TEST_CASE("training loss falls substantially under plain MSE") {
  auto c = small_config();
  c.epochs = 40;
  c.data.generate.noise_sd = 0.1;
  const auto run = train_run(c, load_data(c.data), 3);
  CHECK(run.trace.back().train_loss < 0.1 * run.trace.front().train_loss);
}

TEST_CASE("identical configs give identical reports") {
  auto c = small_config();
  c.weight = WeightConfig(WeightScheme::sb_num, 0.9);
  const auto split = load_data(c.data);
  const auto a = run_experiment(c, split);
  c.workers = 2;
  const auto b = run_experiment(c, split);
  auto ja = to_json(a), jb = to_json(b);
  ja.erase("config");
  jb.erase("config");
  CHECK(ja.dump() == jb.dump());
  CHECK(to_json(run_experiment(c, split)).dump() == to_json(b).dump());
}

TEST_CASE("trace has one entry per evaluation") {
  auto c = small_config();
  c.epochs = 9;
  c.eval_every = 3;
  const auto run = train_run(c, load_data(c.data), 1);
  REQUIRE(run.trace.size() == 3);
  CHECK(run.trace[0].epoch == 3);
  CHECK(run.trace[2].epoch == 9);
  CHECK(run.best_pcc.size() == 8);
  for (const auto& p : run.trace) CHECK(p.test_pcc.size() == 8);
}

TEST_CASE("experiment aggregates over seeds and reports both epoch selections") {
  auto c = small_config();
  const auto r = run_experiment(c, load_data(c.data));
  CHECK(r.runs.size() == 2);
  CHECK(r.runs[0].seed == 1);
  CHECK(r.runs[1].seed == 2);
  CHECK(r.final_epoch.aspects.size() == 8);
  CHECK(r.best_epoch.aspects.size() == 8);
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(*r.best_epoch.aspects[k].pcc.mean >= *r.final_epoch.aspects[k].pcc.mean - 1e-12);
  }
  const auto j = to_json(r);
  CHECK(j.contains("config"));
  CHECK(j.at("config").at("train").at("epochs") == 6);
  CHECK(trace_csv(r).rfind("epoch,word_accuracy", 0) == 0);
}

TEST_CASE("config overrides and validation") {
  TrainConfig c;
  apply_override(c, "scheme.name=sb_rank");
  apply_override(c, "scheme.beta=0.99");
  apply_override(c, "train.epochs=7");
  apply_override(c, "seeds=4,5,6");
  apply_override(c, "data.mixing=identity");
  CHECK(c.weight.scheme == WeightScheme::sb_rank);
  CHECK(c.weight.beta == 0.99);
  CHECK(c.epochs == 7);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5, 6});
  CHECK(c.data.generate.mixing == Mixing::identity);
  CHECK_THROWS_AS(apply_override(c, "train.momentum=0.9"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "epochs"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "train.epochs=-3"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "scheme.name=focal"), ConfigError);

  TrainConfig bad;
  bad.weight.beta = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config JSON round-trips and rejects unknown keys") {
  TrainConfig c;
  c.weight = WeightConfig(WeightScheme::sb_num_nopred, 0.8);
  c.seeds = {9, 8};
  c.data.generate.noise_sd = 0.25;
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"train": {"lr": 0.1, "warmup": 3}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"optimizer": {}})")), ConfigError);
  CHECK(config_from_json(nlohmann::json::parse(R"({"train": {"epochs": 3}})")).lr == 1e-3);
}

TEST_CASE("beta sweep shape and average-weight ordering") {
  auto c = small_config();
  c.epochs = 2;
  const std::vector<double> betas{0.5, 0.9, 0.99};
  const auto rows = sweep_beta(c, load_data(c.data), betas);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].beta == betas[i]);
    CHECK(rows[i].result.config.weight.scheme == WeightScheme::sb_num);
    CHECK(rows[i].result.runs.size() == 2);
  }
  for (const auto& [aspect, w] : rows[0].mean_weight) {
    CHECK(rows[1].mean_weight.at(aspect) < w);
    CHECK(rows[2].mean_weight.at(aspect) < rows[1].mean_weight.at(aspect));
  }
  const std::vector<double> bad{1.0};
  CHECK_THROWS_AS(sweep_beta(c, load_data(c.data), bad), ConfigError);
}

TEST_CASE("comparing a scheme with itself gives identical columns") {
  auto c = small_config();
  c.epochs = 3;
  const std::vector<WeightConfig> schemes{WeightConfig{}, WeightConfig{}, WeightConfig(WeightScheme::sb_rank)};
  const auto out = compare_schemes(c, load_data(c.data), schemes);
  REQUIRE(out.size() == 3);
  CHECK(to_json(out[0].result.final_epoch) == to_json(out[1].result.final_epoch));
  CHECK(out[2].result.final_epoch.aspects.size() == 8);
  CHECK_THROWS_AS(compare_schemes(c, load_data(c.data), std::span(schemes).first(1)), ConfigError);
}

TEST_CASE("class statistics come from the training split only") {
  auto c = small_config();
  c.epochs = 1;
  c.weight = WeightConfig(WeightScheme::sb_num, 0.9);
  auto split = load_data(c.data);
  const auto base = train_run(c, split, 1);
  // altering test labels must not change the trained parameters
  for (auto& s : split.test.samples) {
    for (auto& t : s.targets) t = 2.0 - t;
  }
  const auto changed = train_run(c, split, 1);
  CHECK(std::equal(base.model.params().begin(), base.model.params().end(), changed.model.params().begin()));
}

TEST_CASE("an aspect without training labels is marked inactive") {
  auto c = small_config();
  c.epochs = 2;
  c.weight = WeightConfig(WeightScheme::sb_num, 0.9);
  auto split = load_data(c.data);
  for (auto& s : split.train.samples) s.present[1] = 0;
  const auto run = train_run(c, split, 1);
  CHECK(run.inactive_aspects == std::vector<std::string>{"word_stress"});
  CHECK(run.final_report.aspects.size() == 8);
}

TEST_CASE("data can come from a cached split") {
  auto c = small_config();
  const auto split = load_data(c.data);
  const auto path = (std::filesystem::temp_directory_path() / "sbloss_test_trainer_cache.json").string();
  save_split(path, split);
  DataSource src;
  src.path = path;
  CHECK(load_data(src) == split);
  std::filesystem::remove(path);
}
