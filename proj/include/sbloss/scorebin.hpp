#ifndef SBLOSS_SCOREBIN_HPP
#define SBLOSS_SCOREBIN_HPP

#include <cstddef>
#include <string>

namespace sbloss {

// Scores live on [0, 2] and are bucketed into 11 classes of width 0.2.
inline constexpr std::size_t kNumClasses = 11;
inline constexpr double kClassWidth = 0.2;
inline constexpr double kMaxScore = 2.0;

enum class Level { phoneme, word, utterance };

const char* to_string(Level level);
Level level_from_string(const std::string& name);

struct AspectSpec {
  std::string name;
  Level level = Level::utterance;
  double raw_max = 10.0;  // 2 for phoneme, 10 for word/utterance

  AspectSpec() = default;
  AspectSpec(std::string name, Level level, double raw_max);
  AspectSpec(std::string name, Level level);  // raw_max from level

  bool operator==(const AspectSpec&) const = default;
};

struct ScoreClass {
  std::size_t index = 0;
  double representative() const { return kClassWidth * static_cast<double>(index); }
  bool operator==(const ScoreClass&) const = default;
};

// Maps raw in [0, raw_max] linearly onto [0, 2]. Throws DomainError naming the aspect otherwise.
double rescale_score(double raw, const AspectSpec& spec);

// Class whose half-open interval [s, s + 0.2) contains score. Scores below 0 land in
// class 0, scores at or above 2 in class 10. Non-finite scores throw DomainError.
ScoreClass bin_of(double score);

}  // namespace sbloss

#endif  // SBLOSS_SCOREBIN_HPP
