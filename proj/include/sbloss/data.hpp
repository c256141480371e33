#ifndef SBLOSS_DATA_HPP
#define SBLOSS_DATA_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sbloss/loss.hpp"
#include "sbloss/scorebin.hpp"

namespace sbloss {

// targets and present are indexed like Dataset::aspects; targets are on the [0, 2] scale.
struct Sample {
  std::vector<double> features;
  std::vector<double> targets;
  Mask present;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<AspectSpec> aspects;
  std::size_t in_dim = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  std::size_t aspect_index(const std::string& name) const;  // throws ConfigError
  std::vector<std::string> aspect_names() const;
  // Labels of one aspect over samples where it is present.
  std::vector<double> labels(std::size_t aspect) const;
  // ClassStats per aspect; aspects with no labels are skipped.
  StatsTable class_stats() const;

  bool operator==(const Dataset&) const = default;
};

struct DatasetSplit {
  Dataset train;
  Dataset test;

  bool operator==(const DatasetSplit&) const = default;
};

// Categorical distribution over the 11 score classes. A drawn class k becomes the
// score 0.2 k + jitter * u with u ~ U[0, 1); class 10 is always exactly 2.
// jitter = 0 gives discrete labels sitting on the lattice points. gain scales the
// aspect's column of the mixing matrix, i.e. how strongly it shows in the features.
struct AspectPreset {
  AspectSpec aspect;
  std::array<double, kNumClasses> probs{};
  double jitter = 0.19;
  double gain = 1.0;
};

struct DistributionPreset {
  std::string name;
  std::vector<AspectPreset> aspects;

  // Throws DomainError if any row does not sum to 1 within 1e-9, holds a negative
  // probability, or the jitter could leave its bin.
  void validate() const;
};

// Word Accuracy/Stress/Total and utterance Accuracy/Completeness/Fluency/Prosody/Total,
// shaped after the speechocean762 label histograms. Completeness is discrete on six
// labels (raw 0, 2, ..., 10) with 0.97 of its mass at 2.0; Stress is discrete on
// {1, 2} with a heavy top; the rest are top-skewed, jittered, and populate every class.
DistributionPreset preset_speechocean_like();

// Same eight aspects, every class equally likely.
DistributionPreset preset_balanced();

// "speechocean" or "balanced".
DistributionPreset preset_by_name(const std::string& name);

enum class Mixing {
  dense,     // Gaussian entries scaled by 1/sqrt(#aspects)
  identity,  // feature i carries aspect i % #aspects with unit gain
};

struct GenerateOptions {
  std::size_t n = 5000;
  std::size_t in_dim = 16;
  double noise_sd = 0.5;
  std::uint64_t seed = 0;
  double test_fraction = 0.5;
  Mixing mixing = Mixing::dense;
};

Mixing mixing_from_string(const std::string& name);
const char* to_string(Mixing mixing);

// features = A * scores + N(0, noise_sd^2) with a seed-derived mixing matrix A whose
// column k is scaled by the preset's gain for aspect k.
// The first n * (1 - test_fraction) samples form the training split.
DatasetSplit generate(const DistributionPreset& preset, const GenerateOptions& options);

struct SchemaColumn {
  std::string column;
  AspectSpec aspect;
};

// Label-file schema (JSON):
//   {"format": "csv" | "jsonl" | "auto", "delimiter": ",",
//    "aspects": [{"column": "stress", "name": "Stress", "level": "word", "raw_max": 10}],
//    "features": ["f0", "f1"]}
struct LabelSchema {
  std::string format = "auto";
  char delimiter = ',';
  std::vector<SchemaColumn> columns;
  std::vector<std::string> feature_columns;
};

LabelSchema load_schema(const std::string& path);
LabelSchema parse_schema(const std::string& json_text, const std::string& origin = "<schema>");

// Reads delimiter-separated (with header) or JSON-lines records. Raw scores are
// rescaled to [0, 2]; empty cells, "NA" and JSON null mark a label as missing.
Dataset load_labels(const std::string& path, const LabelSchema& schema);

// Versioned JSON cache of a split; doubles round-trip exactly.
void save_split(const std::string& path, const DatasetSplit& split);
DatasetSplit load_split(const std::string& path);

}  // namespace sbloss

#endif  // SBLOSS_DATA_HPP
