#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

// Trial-level records shared by the study service, the exclusion pipeline and the analysis.
namespace lexdrift {

enum class ItemType : std::uint8_t { Calibration, Critical, Gotcha, Proficiency };
enum class ChoiceSide : std::uint8_t { Left, Right };
/// Normalized choice: low/high for critical trials, correct/incorrect for the rest.
enum class ChoiceVariant : std::uint8_t { Low, High, Correct, Incorrect };

std::string_view toString(ItemType t) noexcept;
std::string_view toString(ChoiceSide s) noexcept;
std::string_view toString(ChoiceVariant v) noexcept;
std::optional<ItemType> parseItemType(std::string_view s) noexcept;
std::optional<ChoiceSide> parseChoiceSide(std::string_view s) noexcept;
std::optional<ChoiceVariant> parseChoiceVariant(std::string_view s) noexcept;

struct TrialRecord {
  std::string sessionId;
  std::string participantId;
  int trialIndex = 0;
  std::string itemId;
  ItemType itemType = ItemType::Critical;
  bool flipped = false;
  ChoiceSide choiceSide = ChoiceSide::Left;
  ChoiceVariant choiceVariant = ChoiceVariant::Low;
  std::optional<double> rtMs;
  std::size_t charLength = 0;
  std::int64_t ts = 0;  // server receive time, ms since the epoch
};

/// Event-log / export line for a response (field order fixed).
std::string toJsonLine(const TrialRecord& r);
/// Throws ParseError; `rt_ms` may be absent or null (QC reports such records).
TrialRecord trialRecordFromJson(std::string_view line, std::size_t lineNo);

/// One retained critical rating, as emitted by QC and consumed by the analysis.
struct Rating {
  std::string participantId;
  std::string itemId;
  ChoiceVariant choice = ChoiceVariant::Low;
  double rtMs = 0;
};

}  // namespace lexdrift
