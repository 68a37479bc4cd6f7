#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "lexdrift/records.hpp"

namespace lexdrift {

/// Minimum plausible reading time scaled by `factor`: factor * (225 + 25 * chars) ms.
constexpr double speedFloor(double charLength, double factor = 0.4) noexcept {
  return factor * (225.0 + 25.0 * charLength);
}

enum class GotchaRule {
  Strict,   // excluded unless both gotcha items are answered correctly
  Lenient,  // excluded only when no gotcha item is answered correctly
};

struct QcConfig {
  std::size_t minItems = 10;
  double speedFactor = 0.4;
  std::size_t fastTrialLimit = 5;
  std::size_t gotchaItems = 2;
  GotchaRule gotchaRule = GotchaRule::Strict;
};

struct ExclusionReport {
  std::vector<std::string> excludedIncomplete;
  std::vector<std::string> excludedGotcha;
  std::vector<std::string> excludedSpeed;
  std::size_t excludedFastRatings = 0;  // critical ratings dropped individually
  std::size_t retainedRatings = 0;      // critical only

  // Audit: critical ratings by fate. input = retained + fast + the three participant-level buckets.
  std::size_t participants = 0;
  std::size_t inputCriticalRatings = 0;
  std::size_t droppedIncompleteRatings = 0;
  std::size_t droppedGotchaRatings = 0;
  std::size_t droppedSpeedRatings = 0;
  /// Critical ratings of participants who pass every participant-level rule, before single-rating drops.
  std::size_t retainedBeforeFastDrops = 0;

  bool reconciles() const noexcept {
    return inputCriticalRatings == retainedRatings + excludedFastRatings + droppedIncompleteRatings +
                                       droppedGotchaRatings + droppedSpeedRatings;
  }
};

struct QcResult {
  std::vector<Rating> retained;  // sorted by participant, then trial order
  ExclusionReport report;
};

/// Throws ValidationError listing records without rt_ms.
QcResult applyExclusions(const std::vector<TrialRecord>& records, const QcConfig& config = {});

void writeRetainedCsv(std::ostream& out, const std::vector<Rating>& ratings);
std::vector<Rating> readRetainedCsv(std::istream& in);

std::string toJson(const ExclusionReport& report, const QcConfig& config);
std::string renderText(const ExclusionReport& report);

}  // namespace lexdrift
