#include "lexdrift/records.hpp"

#include <array>

#include <json.hpp>

#include "lexdrift/error.hpp"

namespace lexdrift {
namespace {

constexpr std::array<std::string_view, 4> kItemTypes = {"calibration", "critical", "gotcha", "proficiency"};
constexpr std::array<std::string_view, 2> kSides = {"left", "right"};
constexpr std::array<std::string_view, 4> kVariants = {"low", "high", "correct", "incorrect"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  return std::nullopt;
}

}  // namespace

std::string_view toString(ItemType t) noexcept { return kItemTypes[static_cast<std::size_t>(t)]; }
std::string_view toString(ChoiceSide s) noexcept { return kSides[static_cast<std::size_t>(s)]; }
std::string_view toString(ChoiceVariant v) noexcept { return kVariants[static_cast<std::size_t>(v)]; }

std::optional<ItemType> parseItemType(std::string_view s) noexcept { return lookup<ItemType>(kItemTypes, s); }
std::optional<ChoiceSide> parseChoiceSide(std::string_view s) noexcept { return lookup<ChoiceSide>(kSides, s); }
std::optional<ChoiceVariant> parseChoiceVariant(std::string_view s) noexcept {
  return lookup<ChoiceVariant>(kVariants, s);
}

std::string toJsonLine(const TrialRecord& r) {
  nlohmann::ordered_json j;
  j["session_id"] = r.sessionId;
  j["participant_id"] = r.participantId;
  j["trial_index"] = r.trialIndex;
  j["item_id"] = r.itemId;
  j["item_type"] = std::string(toString(r.itemType));
  j["flipped"] = r.flipped;
  j["choice_side"] = std::string(toString(r.choiceSide));
  j["choice_variant"] = std::string(toString(r.choiceVariant));
  if (r.rtMs) {
    j["rt_ms"] = *r.rtMs;
  } else {
    j["rt_ms"] = nullptr;
  }
  j["char_length"] = r.charLength;
  j["ts"] = r.ts;
  return j.dump();
}

TrialRecord trialRecordFromJson(std::string_view line, std::size_t lineNo) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(lineNo, std::string("malformed JSON: ") + e.what());
  }
  try {
    TrialRecord r;
    r.sessionId = j.at("session_id").get<std::string>();
    r.participantId = j.at("participant_id").get<std::string>();
    r.trialIndex = j.at("trial_index").get<int>();
    r.itemId = j.at("item_id").get<std::string>();
    auto type = parseItemType(j.at("item_type").get<std::string>());
    auto side = parseChoiceSide(j.at("choice_side").get<std::string>());
    auto variant = parseChoiceVariant(j.at("choice_variant").get<std::string>());
    if (!type || !side || !variant) throw ParseError(lineNo, "unknown enum value in trial record");
    r.itemType = *type;
    r.choiceSide = *side;
    r.choiceVariant = *variant;
    r.flipped = j.value("flipped", false);
    if (j.contains("rt_ms") && !j["rt_ms"].is_null()) r.rtMs = j["rt_ms"].get<double>();
    r.charLength = j.value("char_length", std::size_t{0});
    r.ts = j.value("ts", std::int64_t{0});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(lineNo, std::string("bad trial record: ") + e.what());
  }
}

}  // namespace lexdrift
