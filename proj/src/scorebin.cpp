#include "sbloss/scorebin.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sbloss/error.hpp"

namespace sbloss {

namespace {
// 0.2 has no exact binary form, so lattice points can sit a hair below their class.
constexpr double kBinEpsilon = 1e-9;
}  // namespace

const char* to_string(Level level) {
  switch (level) {
    case Level::phoneme:
      return "phoneme";
    case Level::word:
      return "word";
    case Level::utterance:
      return "utterance";
  }
  return "unknown";
}

Level level_from_string(const std::string& name) {
  if (name == "phoneme") return Level::phoneme;
  if (name == "word") return Level::word;
  if (name == "utterance") return Level::utterance;
  throw DomainError("unknown granularity level '" + name + "'");
}

AspectSpec::AspectSpec(std::string name_, Level level_, double raw_max_)
    : name(std::move(name_)), level(level_), raw_max(raw_max_) {
  if (!(raw_max > 0.0) || !std::isfinite(raw_max)) {
    throw DomainError("aspect '" + name + "': raw_max must be positive");
  }
}

AspectSpec::AspectSpec(std::string name_, Level level_)
    : AspectSpec(std::move(name_), level_, level_ == Level::phoneme ? 2.0 : 10.0) {}

double rescale_score(double raw, const AspectSpec& spec) {
  if (!std::isfinite(raw) || raw < 0.0 || raw > spec.raw_max) {
    std::ostringstream msg;
    msg << "aspect '" << spec.name << "': score " << raw << " outside [0, " << spec.raw_max << "]";
    throw DomainError(msg.str());
  }
  if (spec.raw_max == kMaxScore) return raw;
  return raw * (kMaxScore / spec.raw_max);
}

ScoreClass bin_of(double score) {
  if (!std::isfinite(score)) throw DomainError("bin_of: non-finite score");
  const double top = static_cast<double>(kNumClasses - 1);
  const double slot = std::clamp(std::floor(score * 5.0 + kBinEpsilon), 0.0, top);
  return ScoreClass{static_cast<std::size_t>(slot)};
}

}  // namespace sbloss
