#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "sbloss/data.hpp"
#include "sbloss/error.hpp"
#include "sbloss/metrics.hpp"

using namespace sbloss;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "sbloss_test_data";
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto path = scratch_dir() / name;
  std::ofstream(path) << text;
  return path.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

LabelSchema stress_schema(const std::string& format = "auto") {
  LabelSchema s;
  s.format = format;
  s.columns.push_back({"stress", AspectSpec("Stress", Level::word, 10.0)});
  return s;
}

DistributionPreset single_aspect_uniform() {
  DistributionPreset p;
  p.name = "single";
  AspectPreset a{AspectSpec("A", Level::utterance), {}, 0.19, 1.0};
  a.probs.fill(1.0 / kNumClasses);
  p.aspects.push_back(a);
  return p;
}

}  // namespace

TEST_CASE("noiseless identity mixing puts the score itself in the features") {
  GenerateOptions opt;
  opt.n = 400;
  opt.in_dim = 3;
  opt.noise_sd = 0.0;
  opt.mixing = Mixing::identity;
  const auto split = generate(single_aspect_uniform(), opt);
  std::vector<double> x, y;
  for (const auto& s : split.train.samples) {
    for (double f : s.features) CHECK(f == s.targets[0]);
    x.push_back(s.features[0]);
    y.push_back(s.targets[0]);
  }
  CHECK(*pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("speechocean preset reproduces the completeness skew") {
  GenerateOptions opt;
  opt.n = 10000;
  opt.seed = 3;
  const auto split = generate(preset_speechocean_like(), opt);
  const auto k = split.train.aspect_index("utt_completeness");
  std::size_t top = 0, total = 0;
  for (const auto* ds : {&split.train, &split.test}) {
    for (const auto& s : ds->samples) {
      total += 1;
      top += s.targets[k] == 2.0;
    }
  }
  CHECK(total == 10000);
  CHECK(std::abs(static_cast<double>(top) / total - 0.97) <= 0.01);
}

TEST_CASE("preset contract") {
  for (const auto& preset : {preset_speechocean_like(), preset_balanced()}) {
    CHECK_NOTHROW(preset.validate());
    CHECK(preset.aspects.size() == 8);
    for (const auto& a : preset.aspects) {
      double sum = 0.0;
      for (double p : a.probs) sum += p;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  const auto so = preset_speechocean_like();
  for (const auto& a : so.aspects) {
    if (a.aspect.name != "word_stress") continue;
    for (std::size_t c = 0; c < 5; ++c) CHECK(a.probs[c] == 0.0);
  }
  CHECK(preset_by_name("balanced").name == preset_balanced().name);
  CHECK_THROWS_AS(preset_by_name("nope"), ConfigError);
}

TEST_CASE("invalid presets are rejected") {
  auto p = single_aspect_uniform();
  p.aspects[0].probs[0] += 0.1;
  CHECK_THROWS_AS(p.validate(), DomainError);
  CHECK_THROWS_AS(generate(p, GenerateOptions{}), DomainError);

  p = single_aspect_uniform();
  p.aspects[0].probs[0] = -0.01;
  p.aspects[0].probs[1] += 0.01 + 1.0 / kNumClasses;
  CHECK_THROWS_AS(p.validate(), DomainError);

  p = single_aspect_uniform();
  p.aspects[0].jitter = 0.25;
  CHECK_THROWS_AS(p.validate(), DomainError);

  p = single_aspect_uniform();
  p.aspects[0].gain = -1.0;
  CHECK_THROWS_AS(p.validate(), DomainError);

  GenerateOptions bad;
  bad.test_fraction = 1.0;
  CHECK_THROWS_AS(generate(single_aspect_uniform(), bad), DomainError);
}

TEST_CASE("generation is deterministic per seed") {
  GenerateOptions opt;
  opt.n = 300;
  opt.seed = 9;
  const auto a = generate(preset_speechocean_like(), opt);
  const auto b = generate(preset_speechocean_like(), opt);
  CHECK(a == b);
  opt.seed = 10;
  CHECK_FALSE(a == generate(preset_speechocean_like(), opt));
}

TEST_CASE("generated scores stay inside their drawn class") {
  GenerateOptions opt;
  opt.n = 2000;
  const auto split = generate(preset_speechocean_like(), opt);
  const auto preset = preset_speechocean_like();
  for (const auto& s : split.train.samples) {
    for (std::size_t k = 0; k < s.targets.size(); ++k) {
      const double t = s.targets[k];
      REQUIRE(t >= 0.0);
      REQUIRE(t <= 2.0);
      const auto c = bin_of(t).index;
      REQUIRE(preset.aspects[k].probs[c] > 0.0);
      if (preset.aspects[k].jitter == 0.0) REQUIRE(t == kClassWidth * static_cast<double>(c));
    }
  }
}

TEST_CASE("split sizes and disjointness") {
  GenerateOptions opt;
  opt.n = 1000;
  opt.test_fraction = 0.3;
  const auto split = generate(preset_balanced(), opt);
  CHECK(split.train.size() == 700);
  CHECK(split.test.size() == 300);
  std::set<std::vector<double>> train_features;
  for (const auto& s : split.train.samples) train_features.insert(s.features);
  for (const auto& s : split.test.samples) CHECK(train_features.count(s.features) == 0);
}

TEST_CASE("csv labels are rescaled and counted") {
  const auto path = write_file("three.csv", "stress\n10\n10\n0\n");
  const auto ds = load_labels(path, stress_schema());
  REQUIRE(ds.size() == 3);
  const auto stats = ds.class_stats().at("Stress");
  CHECK(stats.counts()[10] == 2);
  CHECK(stats.counts()[0] == 1);
  CHECK(stats.total() == 3);
}

TEST_CASE("missing labels are masked out, not zero") {
  const auto path = write_file("missing.csv", "id,stress\na,10\nb,\nc,NA\nd,4\n");
  const auto ds = load_labels(path, stress_schema());
  REQUIRE(ds.size() == 4);
  CHECK(ds.samples[1].present[0] == 0);
  CHECK(ds.samples[2].present[0] == 0);
  CHECK(ds.labels(0) == std::vector<double>{2.0, 0.8});
  CHECK(ds.class_stats().at("Stress").total() == 2);

  const auto jpath = write_file("missing.jsonl", "{\"stress\": 10}\n{\"other\": 1}\n{\"stress\": null}\n");
  const auto js = load_labels(jpath, stress_schema());
  CHECK(js.labels(0) == std::vector<double>{2.0});
}

TEST_CASE("out-of-range scores are rejected with the line number") {
  const auto path = write_file("bad.csv", "stress\n10\n4\n11\n");
  try {
    load_labels(path, stress_schema());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("Stress") != std::string::npos);
  }
  const auto jpath = write_file("bad.jsonl", "{\"stress\": 3}\n{\"stress\": -1}\n");
  try {
    load_labels(jpath, stress_schema());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("malformed label files") {
  CHECK_THROWS_AS(load_labels(write_file("fields.csv", "id,stress\na,1,2\n"), stress_schema()), ParseError);
  CHECK_THROWS_AS(load_labels(write_file("nan.csv", "stress\nabc\n"), stress_schema()), ParseError);
  CHECK_THROWS_AS(load_labels(write_file("nocol.csv", "accuracy\n3\n"), stress_schema()), ConfigError);
  CHECK_THROWS_AS(load_labels(write_file("broken.jsonl", "{\"stress\": \n"), stress_schema()), ParseError);
}

TEST_CASE("schema parsing") {
  const auto s = parse_schema(
      R"({"format": "csv", "delimiter": ";", "aspects": [{"column": "acc", "name": "Accuracy", "level": "utterance"},
          {"column": "ph", "name": "Phone", "level": "phoneme"}], "features": ["f0"]})");
  CHECK(s.delimiter == ';');
  REQUIRE(s.columns.size() == 2);
  CHECK(s.columns[0].aspect.raw_max == 10.0);
  CHECK(s.columns[1].aspect.raw_max == 2.0);
  CHECK(s.feature_columns == std::vector<std::string>{"f0"});
  CHECK_THROWS_AS(parse_schema("{"), ConfigError);
  CHECK_THROWS_AS(parse_schema(R"({"aspects": []})"), ConfigError);
  CHECK_THROWS_AS(parse_schema(R"({"aspects": [{"column": "a", "name": "A", "level": "sentence"}]})"), ConfigError);
  CHECK_THROWS_AS(parse_schema(R"({"format": "xml", "aspects": [{"column": "a", "name": "A", "level": "word"}]})"),
                  ConfigError);
}

TEST_CASE("features are read alongside labels") {
  LabelSchema schema = stress_schema();
  schema.feature_columns = {"f0", "f1"};
  const auto path = write_file("feat.csv", "f0,stress,f1\n0.5,10,-1\n1.5,2,2\n");
  const auto ds = load_labels(path, schema);
  CHECK(ds.in_dim == 2);
  CHECK(ds.samples[1].features == std::vector<double>{1.5, 2.0});
}

TEST_CASE("loading leaves the input untouched and is repeatable") {
  const std::string text = "stress\n10\n6\n\n2\n";
  const auto path = write_file("idem.csv", text);
  const auto a = load_labels(path, stress_schema());
  const auto b = load_labels(path, stress_schema());
  CHECK(a == b);
  CHECK(read_file(path) == text);
}

TEST_CASE("dataset cache round-trips exactly") {
  GenerateOptions opt;
  opt.n = 200;
  opt.seed = 5;
  const auto split = generate(preset_speechocean_like(), opt);
  const auto path = (scratch_dir() / "cache.json").string();
  save_split(path, split);
  CHECK(load_split(path) == split);
  CHECK_THROWS_AS(load_split(write_file("notcache.json", R"({"format": "other", "version": 1})")), ParseError);
  CHECK_THROWS_AS(load_split((scratch_dir() / "absent.json").string()), ParseError);
}

TEST_CASE("class stats skip unlabelled aspects") {
  Dataset ds;
  ds.aspects = {AspectSpec("A", Level::word), AspectSpec("B", Level::word)};
  ds.in_dim = 1;
  ds.samples.push_back({{0.0}, {1.0, 0.0}, {1, 0}});
  ds.samples.push_back({{0.0}, {2.0, 0.0}, {1, 0}});
  const auto stats = ds.class_stats();
  CHECK(stats.count("A") == 1);
  CHECK(stats.count("B") == 0);
  CHECK_THROWS_AS(ds.aspect_index("C"), ConfigError);
}
