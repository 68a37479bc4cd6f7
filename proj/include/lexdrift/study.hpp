#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexdrift/itemgen.hpp"
#include "lexdrift/records.hpp"

namespace lexdrift {

/// Calibration or proficiency item: one adequate text and one deliberately poor one.
struct ControlItem {
  std::string itemId;
  std::string goodText;
  std::string poorText;
};

/// Attention check; the instruction to click a side is embedded in the texts.
struct GotchaItem {
  std::string itemId;
  std::string textA;
  std::string textB;
  ChoiceSide instructedSide = ChoiceSide::Left;
};

enum class CharLengthMode { Longer, Sum };

struct StudyConfig {
  std::vector<ItemPair> pairs;  // pool of critical items; each session draws criticalPerSession of them
  std::size_t criticalPerSession = 20;
  ControlItem calibration;
  std::vector<GotchaItem> gotchas;       // exactly 2
  std::vector<ControlItem> proficiency;  // exactly 2
  std::uint64_t seed = 0;
  CharLengthMode charLength = CharLengthMode::Longer;
  double speedFactor = 0.4;
  std::int64_t idleTimeoutMs = 24LL * 3600 * 1000;
  std::string instructions =
      "In the following, you will read a series of research summaries, with two alternatives next to each other. "
      "Please express which alternative you overall prefer. Some of the items are hard, do the best you can!";

  std::size_t trialsPerSession() const noexcept { return 1 + criticalPerSession + gotchas.size() + proficiency.size(); }
};

/// Placeholder calibration, gotcha and proficiency items; replace the copy for a real deployment.
void addDefaultControls(StudyConfig& config);
/// Reads {"calibration": {...}, "gotchas": [...], "proficiency": [...]} control-item definitions.
void loadControls(StudyConfig& config, const nlohmann::json& controls);

struct TrialSpec {
  int trialIndex = 0;
  std::string itemId;
  ItemType itemType = ItemType::Critical;
  bool flipped = false;
  std::string leftVariantId;
  std::string rightVariantId;
};

/// Pure plan construction: calibration first, gotcha/proficiency at random positions in 2..N,
/// sampled critical items in random order, one fair flip per trial.
std::vector<TrialSpec> planSession(const StudyConfig& config, std::uint64_t seed);

/// Seed of a participant's session under a study seed.
std::uint64_t sessionSeed(std::uint64_t studySeed, std::string_view participantId) noexcept;

/// Maps a click to low/high (critical) or correct/incorrect (everything else).
ChoiceVariant normalizeChoice(ItemType type, bool flipped, ChoiceSide side,
                              std::optional<ChoiceSide> instructedSide = std::nullopt) noexcept;

enum class SessionStatus { Open, Complete, Abandoned };
std::string_view toString(SessionStatus s) noexcept;

struct Session {
  std::string sessionId;
  std::string participantId;
  std::vector<TrialSpec> plan;
  std::int64_t createdAt = 0;
  std::uint64_t seed = 0;
};

/// What a participant sees; identical shape for every item type.
struct TrialView {
  std::string sessionId;
  int trialIndex = 0;
  int totalTrials = 0;
  std::string instructions;
  std::string leftText;
  std::string rightText;

  nlohmann::json toJson() const;
};

struct ResponseResult {
  TrialRecord record;
  bool tooFast = false;
};

/// Append-only line sink; one serialized appender, flushed per line.
class EventLog {
 public:
  explicit EventLog(std::ostream& out) : out_(&out) {}
  void append(const std::string& line);

 private:
  std::mutex mutex_;
  std::ostream* out_;
};

class StudyService {
 public:
  using Clock = std::function<std::int64_t()>;  // ms since the epoch

  /// `log` may be null (in-memory only). Throws ConfigError on a malformed configuration.
  StudyService(StudyConfig config, EventLog* log, Clock clock);
  ~StudyService();

  Session createSession(const std::string& participantId);
  /// std::nullopt once the session is finished or abandoned. Throws NotFoundError.
  std::optional<TrialView> nextTrial(const std::string& sessionId) const;
  ResponseResult recordResponse(const std::string& sessionId, int trialIndex, ChoiceSide side, double rtMs);

  /// Marks sessions idle longer than the timeout as abandoned; returns how many.
  std::size_t expireIdle(std::int64_t now);

  /// Response records in session-creation order, then trial order.
  std::vector<TrialRecord> exportRecords() const;
  void writeExport(std::ostream& out) const;

  /// Deterministic dump of all session state.
  std::string snapshot() const;

  /// Rebuilds state from a previously written event log without re-appending to it.
  void replay(std::istream& log);

  const StudyConfig& config() const noexcept { return config_; }

 private:
  struct State;
  struct SessionState;

  SessionState& find(const std::string& sessionId) const;
  std::string textFor(const TrialSpec& spec, bool left) const;
  void applySession(Session session, std::int64_t ordinal);
  TrialRecord buildRecord(const SessionState& s, const TrialSpec& spec, ChoiceSide side, double rtMs,
                          std::int64_t ts) const;

  StudyConfig config_;
  EventLog* log_;
  Clock clock_;
  std::unique_ptr<State> state_;
};

}  // namespace lexdrift
