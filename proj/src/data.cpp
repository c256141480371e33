#include "sbloss/data.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "sbloss/error.hpp"

namespace sbloss {

using json = nlohmann::json;

namespace {

constexpr const char* kDatasetFormat = "sbloss-dataset";
constexpr int kDatasetVersion = 1;

const std::vector<AspectSpec>& speechocean_aspects() {
  static const std::vector<AspectSpec> aspects = {
      {"word_accuracy", Level::word},        {"word_stress", Level::word},
      {"word_total", Level::word},           {"utt_accuracy", Level::utterance},
      {"utt_completeness", Level::utterance}, {"utt_fluency", Level::utterance},
      {"utt_prosody", Level::utterance},     {"utt_total", Level::utterance},
  };
  return aspects;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, delim)) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) cells.emplace_back();
  return cells;
}

bool is_missing_token(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

double parse_number(const std::string& cell, const std::string& path, std::size_t line,
                    const std::string& column) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0' || !std::isfinite(v)) {
    throw ParseError(path, line, "column '" + column + "': not a number: '" + cell + "'");
  }
  return v;
}

void set_label(Sample& s, std::size_t k, double raw, const AspectSpec& aspect,
               const std::string& path, std::size_t line) {
  try {
    s.targets[k] = rescale_score(raw, aspect);
    s.present[k] = 1;
  } catch (const DomainError& e) {
    throw ParseError(path, line, e.what());
  }
}

Dataset empty_dataset(const LabelSchema& schema) {
  Dataset ds;
  for (const auto& c : schema.columns) ds.aspects.push_back(c.aspect);
  ds.in_dim = schema.feature_columns.size();
  return ds;
}

Sample blank_sample(const LabelSchema& schema) {
  Sample s;
  s.features.assign(schema.feature_columns.size(), 0.0);
  s.targets.assign(schema.columns.size(), 0.0);
  s.present.assign(schema.columns.size(), 0);
  return s;
}

Dataset load_csv(const std::string& path, std::istream& in, const LabelSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw ParseError(path, 0, "missing header row");
  const auto header = split(line, schema.delimiter);
  auto column_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ConfigError(path + ": schema column '" + name + "' not found in header");
  };
  std::vector<std::size_t> label_cols, feature_cols;
  for (const auto& c : schema.columns) label_cols.push_back(column_of(c.column));
  for (const auto& f : schema.feature_columns) feature_cols.push_back(column_of(f));

  Dataset ds = empty_dataset(schema);
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(line, schema.delimiter);
    if (cells.size() != header.size()) {
      throw ParseError(path, line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                          std::to_string(cells.size()));
    }
    Sample s = blank_sample(schema);
    for (std::size_t k = 0; k < label_cols.size(); ++k) {
      const auto& cell = cells[label_cols[k]];
      if (is_missing_token(cell)) continue;
      const double raw = parse_number(cell, path, line_no, schema.columns[k].column);
      set_label(s, k, raw, schema.columns[k].aspect, path, line_no);
    }
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      s.features[f] = parse_number(cells[feature_cols[f]], path, line_no, schema.feature_columns[f]);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset load_jsonl(const std::string& path, std::istream& in, const LabelSchema& schema) {
  Dataset ds = empty_dataset(schema);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!row.is_object()) throw ParseError(path, line_no, "record is not a JSON object");

    Sample s = blank_sample(schema);
    for (std::size_t k = 0; k < schema.columns.size(); ++k) {
      auto it = row.find(schema.columns[k].column);
      if (it == row.end() || it->is_null()) continue;
      if (!it->is_number()) {
        throw ParseError(path, line_no, "field '" + schema.columns[k].column + "' is not a number");
      }
      set_label(s, k, it->get<double>(), schema.columns[k].aspect, path, line_no);
    }
    for (std::size_t f = 0; f < schema.feature_columns.size(); ++f) {
      auto it = row.find(schema.feature_columns[f]);
      if (it == row.end() || !it->is_number()) {
        throw ParseError(path, line_no, "feature '" + schema.feature_columns[f] + "' missing or not a number");
      }
      s.features[f] = it->get<double>();
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

json dataset_to_json(const Dataset& ds) {
  json aspects = json::array();
  for (const auto& a : ds.aspects) {
    aspects.push_back({{"name", a.name}, {"level", to_string(a.level)}, {"raw_max", a.raw_max}});
  }
  json samples = json::array();
  for (const auto& s : ds.samples) {
    samples.push_back({{"x", s.features}, {"y", s.targets}, {"present", s.present}});
  }
  return {{"aspects", aspects}, {"in_dim", ds.in_dim}, {"samples", samples}};
}

Dataset dataset_from_json(const json& j) {
  Dataset ds;
  for (const auto& a : j.at("aspects")) {
    ds.aspects.emplace_back(a.at("name").get<std::string>(),
                            level_from_string(a.at("level").get<std::string>()),
                            a.at("raw_max").get<double>());
  }
  ds.in_dim = j.at("in_dim").get<std::size_t>();
  for (const auto& s : j.at("samples")) {
    Sample sample;
    sample.features = s.at("x").get<std::vector<double>>();
    sample.targets = s.at("y").get<std::vector<double>>();
    sample.present = s.at("present").get<Mask>();
    if (sample.features.size() != ds.in_dim || sample.targets.size() != ds.aspects.size() ||
        sample.present.size() != ds.aspects.size()) {
      throw DomainError("dataset cache: sample shape does not match header");
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

}  // namespace

std::size_t Dataset::aspect_index(const std::string& name) const {
  for (std::size_t k = 0; k < aspects.size(); ++k) {
    if (aspects[k].name == name) return k;
  }
  throw ConfigError("unknown aspect '" + name + "'");
}

std::vector<std::string> Dataset::aspect_names() const {
  std::vector<std::string> names;
  for (const auto& a : aspects) names.push_back(a.name);
  return names;
}

std::vector<double> Dataset::labels(std::size_t aspect) const {
  std::vector<double> out;
  for (const auto& s : samples) {
    if (s.present.at(aspect)) out.push_back(s.targets[aspect]);
  }
  return out;
}

StatsTable Dataset::class_stats() const {
  StatsTable table;
  for (std::size_t k = 0; k < aspects.size(); ++k) {
    const auto y = labels(k);
    if (y.empty()) continue;
    table.emplace(aspects[k].name, compute_class_stats(y, aspects[k]));
  }
  return table;
}

void DistributionPreset::validate() const {
  if (aspects.empty()) throw DomainError("preset '" + name + "' has no aspects");
  for (const auto& a : aspects) {
    if (!(a.gain >= 0.0) || !std::isfinite(a.gain)) {
      throw DomainError("preset '" + name + "': gain for " + a.aspect.name + " must be non-negative");
    }
    if (!(a.jitter >= 0.0 && a.jitter <= 0.199)) {
      throw DomainError("preset '" + name + "': jitter for " + a.aspect.name + " must lie in [0, 0.199]");
    }
    double sum = 0.0;
    for (double p : a.probs) {
      if (!(p >= 0.0)) throw DomainError("preset '" + name + "': negative probability for " + a.aspect.name);
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw DomainError("preset '" + name + "': probabilities for " + a.aspect.name +
                        " sum to " + std::to_string(sum));
    }
  }
}

DistributionPreset preset_speechocean_like() {
  using P = std::array<double, kNumClasses>;
  const auto& a = speechocean_aspects();

  // Remaining 0.03 on raw 0, 2, 4, 6, 8, weighted toward the top.
  P completeness{0.002, 0.0, 0.004, 0.0, 0.006, 0.0, 0.008, 0.0, 0.010, 0.0, 0.97};

  // Signal gains scale each aspect's column of the mixing matrix. They were set once so
  // that plain-MSE training at the default noise level lands near a per-aspect PCC
  // profile of word ~0.53, stress ~0.27, completeness ~0.13, utterance ~0.72-0.76.
  DistributionPreset preset;
  preset.name = "speechocean";
  preset.aspects = {
      {a[0], P{0.01, 0.01, 0.01, 0.02, 0.02, 0.03, 0.05, 0.08, 0.12, 0.20, 0.45}, 0.19, 0.68},
      {a[1], P{0.0, 0.0, 0.0, 0.0, 0.0, 0.06, 0.0, 0.0, 0.0, 0.0, 0.94}, 0.0, 0.72},
      {a[2], P{0.01, 0.01, 0.01, 0.02, 0.03, 0.04, 0.06, 0.09, 0.13, 0.20, 0.40}, 0.19, 0.46},
      {a[3], P{0.005, 0.005, 0.01, 0.02, 0.04, 0.07, 0.12, 0.20, 0.25, 0.18, 0.10}, 0.19, 1.06},
      {a[4], completeness, 0.0, 0.43},
      {a[5], P{0.005, 0.005, 0.01, 0.02, 0.03, 0.06, 0.10, 0.18, 0.27, 0.20, 0.12}, 0.19, 0.83},
      {a[6], P{0.005, 0.005, 0.01, 0.02, 0.04, 0.07, 0.11, 0.20, 0.26, 0.18, 0.10}, 0.19, 0.83},
      {a[7], P{0.005, 0.005, 0.01, 0.02, 0.04, 0.07, 0.12, 0.21, 0.25, 0.17, 0.10}, 0.19, 0.79},
  };
  return preset;
}

DistributionPreset preset_balanced() {
  DistributionPreset preset;
  preset.name = "balanced";
  std::array<double, kNumClasses> uniform{};
  uniform.fill(1.0 / static_cast<double>(kNumClasses));
  for (const auto& a : speechocean_aspects()) preset.aspects.push_back({a, uniform});
  return preset;
}

DistributionPreset preset_by_name(const std::string& name) {
  if (name == "speechocean") return preset_speechocean_like();
  if (name == "balanced") return preset_balanced();
  throw ConfigError("unknown preset '" + name + "' (expected speechocean or balanced)");
}

Mixing mixing_from_string(const std::string& name) {
  if (name == "dense") return Mixing::dense;
  if (name == "identity") return Mixing::identity;
  throw ConfigError("unknown mixing '" + name + "' (expected dense or identity)");
}

const char* to_string(Mixing mixing) { return mixing == Mixing::dense ? "dense" : "identity"; }

DatasetSplit generate(const DistributionPreset& preset, const GenerateOptions& options) {
  preset.validate();
  if (options.n < 10) throw DomainError("generate: need at least 10 samples");
  if (!(options.noise_sd >= 0.0)) throw DomainError("generate: noise_sd must be non-negative");
  if (options.in_dim == 0) throw DomainError("generate: in_dim must be positive");
  if (!(options.test_fraction > 0.0 && options.test_fraction < 1.0)) {
    throw DomainError("generate: test_fraction must lie in (0, 1)");
  }

  const std::size_t m = preset.aspects.size();
  std::mt19937_64 rng(options.seed);

  std::vector<double> mixing(options.in_dim * m, 0.0);  // row-major [in_dim][m]
  if (options.mixing == Mixing::dense) {
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(m)));
    for (double& v : mixing) v = gauss(rng);
  } else {
    for (std::size_t i = 0; i < options.in_dim; ++i) mixing[i * m + i % m] = 1.0;
  }
  for (std::size_t i = 0; i < options.in_dim; ++i) {
    for (std::size_t k = 0; k < m; ++k) mixing[i * m + k] *= preset.aspects[k].gain;
  }

  std::vector<std::discrete_distribution<std::size_t>> class_dists;
  for (const auto& a : preset.aspects) class_dists.emplace_back(a.probs.begin(), a.probs.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset all;
  for (const auto& a : preset.aspects) all.aspects.push_back(a.aspect);
  all.in_dim = options.in_dim;
  all.samples.reserve(options.n);
  for (std::size_t s = 0; s < options.n; ++s) {
    Sample sample;
    sample.targets.resize(m);
    sample.present.assign(m, 1);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t cls = class_dists[k](rng);
      const double u = unit(rng);
      const double base = kClassWidth * static_cast<double>(cls);
      sample.targets[k] = cls + 1 == kNumClasses ? kMaxScore : base + preset.aspects[k].jitter * u;
    }
    sample.features.resize(options.in_dim);
    for (std::size_t i = 0; i < options.in_dim; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += mixing[i * m + k] * sample.targets[k];
      const double eps = noise(rng);
      sample.features[i] = acc + options.noise_sd * eps;
    }
    all.samples.push_back(std::move(sample));
  }

  const auto n_train = static_cast<std::size_t>(
      std::llround(static_cast<double>(options.n) * (1.0 - options.test_fraction)));
  DatasetSplit split;
  split.train.aspects = split.test.aspects = all.aspects;
  split.train.in_dim = split.test.in_dim = all.in_dim;
  split.train.samples.assign(all.samples.begin(), all.samples.begin() + n_train);
  split.test.samples.assign(all.samples.begin() + n_train, all.samples.end());
  return split;
}

LabelSchema parse_schema(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": invalid schema JSON: " + e.what());
  }
  LabelSchema schema;
  try {
    schema.format = j.value("format", std::string("auto"));
    if (schema.format != "auto" && schema.format != "csv" && schema.format != "jsonl") {
      throw ConfigError(origin + ": unknown format '" + schema.format + "'");
    }
    const auto delim = j.value("delimiter", std::string(","));
    if (delim.size() != 1) throw ConfigError(origin + ": delimiter must be one character");
    schema.delimiter = delim[0];
    for (const auto& a : j.at("aspects")) {
      SchemaColumn col;
      col.column = a.at("column").get<std::string>();
      const auto name = a.value("name", col.column);
      const auto level = level_from_string(a.at("level").get<std::string>());
      col.aspect = a.contains("raw_max") ? AspectSpec(name, level, a.at("raw_max").get<double>())
                                         : AspectSpec(name, level);
      schema.columns.push_back(std::move(col));
    }
    if (j.contains("features")) schema.feature_columns = j.at("features").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (schema.columns.empty()) throw ConfigError(origin + ": schema lists no aspects");
  return schema;
}

LabelSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_schema(buf.str(), path);
}

Dataset load_labels(const std::string& path, const LabelSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open label file");
  std::string format = schema.format;
  if (format == "auto") format = (ends_with(path, ".jsonl") || ends_with(path, ".json")) ? "jsonl" : "csv";
  return format == "jsonl" ? load_jsonl(path, in, schema) : load_csv(path, in, schema);
}

void save_split(const std::string& path, const DatasetSplit& split) {
  json j = {{"format", kDatasetFormat},
            {"version", kDatasetVersion},
            {"train", dataset_to_json(split.train)},
            {"test", dataset_to_json(split.test)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset '" + path + "'");
  out << j.dump() << '\n';
}

DatasetSplit load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open dataset");
  json j;
  try {
    in >> j;
    if (j.at("format").get<std::string>() != kDatasetFormat) throw ParseError(path, 0, "not a dataset cache");
    if (j.at("version").get<int>() != kDatasetVersion) {
      throw ParseError(path, 0, "unsupported dataset version");
    }
    return DatasetSplit{dataset_from_json(j.at("train")), dataset_from_json(j.at("test"))};
  } catch (const json::exception& e) {
    throw ParseError(path, 0, e.what());
  } catch (const DomainError& e) {
    throw ParseError(path, 0, e.what());
  }
}

}  // namespace sbloss
