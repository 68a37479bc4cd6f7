#include "lexdrift/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "lexdrift/error.hpp"
#include "lexdrift/qc.hpp"
#include "lexdrift/random.hpp"
#include "lexdrift/text.hpp"

namespace lexdrift {
namespace {

constexpr const char* kGood = "good";
constexpr const char* kPoor = "poor";
constexpr const char* kTextA = "a";
constexpr const char* kTextB = "b";

std::string hex8(std::uint64_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(v & 0xFFFFFFFFu));
  return buf;
}

nlohmann::ordered_json specJson(const TrialSpec& t) {
  nlohmann::ordered_json j;
  j["trial_index"] = t.trialIndex;
  j["item_id"] = t.itemId;
  j["item_type"] = std::string(toString(t.itemType));
  j["flipped"] = t.flipped;
  j["left_variant_id"] = t.leftVariantId;
  j["right_variant_id"] = t.rightVariantId;
  return j;
}

TrialSpec specFromJson(const nlohmann::json& j) {
  TrialSpec t;
  t.trialIndex = j.at("trial_index").get<int>();
  t.itemId = j.at("item_id").get<std::string>();
  auto type = parseItemType(j.at("item_type").get<std::string>());
  if (!type) throw ValidationError("unknown item_type in session plan");
  t.itemType = *type;
  t.flipped = j.at("flipped").get<bool>();
  t.leftVariantId = j.at("left_variant_id").get<std::string>();
  t.rightVariantId = j.at("right_variant_id").get<std::string>();
  return t;
}

void orient(TrialSpec& t, const std::string& first, const std::string& second) {
  t.leftVariantId = t.flipped ? second : first;
  t.rightVariantId = t.flipped ? first : second;
}

}  // namespace

void addDefaultControls(StudyConfig& config) {
  // Placeholder copy.
  config.calibration = {
      "calibration",
      "This study examined how sleep duration relates to reaction time in adults. Participants who slept less than "
      "six hours showed slower responses on a standard attention task than those who slept seven hours or more. "
      "The results suggest that short sleep impairs sustained attention.",
      "study sleep the we did and. reaction slow time was maybe, adults some? results results are a task of "
      "attention sleep hours the."};
  config.gotchas = {
      {"gotcha-1",
       "Researchers measured air quality in twelve cities over one year. This is not a real item, please click on "
       "the left button. Levels of fine particles were highest during winter months.",
       "Researchers measured air quality in twelve cities over one year. This is not a real item, please click on "
       "the left button. Fine particle levels peaked in the winter months.",
       ChoiceSide::Left},
      {"gotcha-2",
       "A survey of school teachers explored attitudes toward digital homework. This is not a real item, please "
       "click on the left button. Most respondents favored a mix of paper and online tasks.",
       "A survey of school teachers explored views on digital homework. This is not a real item, please click on "
       "the left button. Most respondents preferred combining paper and online tasks.",
       ChoiceSide::Left}};
  config.proficiency = {
      {"proficiency-1",
       "The trial compared two exercise programs for older adults and found that both improved balance after "
       "twelve weeks.",
       "The trial compare two exercise program for older adult and it find both improving the balance after twelve "
       "week."},
      {"proficiency-2",
       "Water samples from forty wells were tested, and most met the national safety standard for nitrates.",
       "Water sample from forty well was test, and the most of them meets national safety standard of nitrate."}};
}

void loadControls(StudyConfig& config, const nlohmann::json& c) {
  try {
    auto control = [](const nlohmann::json& j) {
      return ControlItem{j.at("item_id").get<std::string>(), j.at("good_text").get<std::string>(),
                         j.at("poor_text").get<std::string>()};
    };
    if (c.contains("calibration")) config.calibration = control(c["calibration"]);
    if (c.contains("proficiency")) {
      config.proficiency.clear();
      for (const auto& j : c["proficiency"]) config.proficiency.push_back(control(j));
    }
    if (c.contains("gotchas")) {
      config.gotchas.clear();
      for (const auto& j : c["gotchas"]) {
        auto side = parseChoiceSide(j.value("instructed_side", std::string("left")));
        if (!side) throw ConfigError("gotcha instructed_side must be left or right");
        config.gotchas.push_back({j.at("item_id").get<std::string>(), j.at("text_a").get<std::string>(),
                                  j.at("text_b").get<std::string>(), *side});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad control-item definition: ") + e.what());
  }
}

std::uint64_t sessionSeed(std::uint64_t studySeed, std::string_view participantId) noexcept {
  return rnd::splitmix64(studySeed ^ rnd::splitmix64(rnd::fnv1a(participantId)));
}

std::vector<TrialSpec> planSession(const StudyConfig& config, std::uint64_t seed) {
  rnd::Engine rng(seed);
  const int total = static_cast<int>(config.trialsPerSession());

  std::vector<int> positions(static_cast<std::size_t>(total - 1));
  std::iota(positions.begin(), positions.end(), 2);
  const auto special = rnd::sample(positions, config.gotchas.size() + config.proficiency.size(), rng);

  std::vector<std::size_t> pool(config.pairs.size());
  std::iota(pool.begin(), pool.end(), 0);
  const auto critical = rnd::sample(pool, config.criticalPerSession, rng);

  std::vector<TrialSpec> plan(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) plan[static_cast<std::size_t>(i)].trialIndex = i + 1;
  std::vector<bool> taken(static_cast<std::size_t>(total + 1), false);

  plan[0].itemId = config.calibration.itemId;
  plan[0].itemType = ItemType::Calibration;
  taken[1] = true;
  for (std::size_t s = 0; s < special.size(); ++s) {
    auto& t = plan[static_cast<std::size_t>(special[s] - 1)];
    taken[static_cast<std::size_t>(special[s])] = true;
    if (s < config.gotchas.size()) {
      t.itemId = config.gotchas[s].itemId;
      t.itemType = ItemType::Gotcha;
    } else {
      t.itemId = config.proficiency[s - config.gotchas.size()].itemId;
      t.itemType = ItemType::Proficiency;
    }
  }
  std::size_t next = 0;
  for (int pos = 2; pos <= total; ++pos) {
    if (taken[static_cast<std::size_t>(pos)]) continue;
    auto& t = plan[static_cast<std::size_t>(pos - 1)];
    t.itemId = config.pairs[critical[next++]].abstractId;
    t.itemType = ItemType::Critical;
  }

  for (auto& t : plan) {
    t.flipped = rnd::coin(rng);
    switch (t.itemType) {
      case ItemType::Critical: {
        const auto it = std::find_if(config.pairs.begin(), config.pairs.end(),
                                     [&](const ItemPair& p) { return p.abstractId == t.itemId; });
        orient(t, it->low.variantId, it->high.variantId);
        break;
      }
      case ItemType::Gotcha:
        orient(t, kTextA, kTextB);
        break;
      case ItemType::Calibration:
      case ItemType::Proficiency:
        orient(t, kGood, kPoor);
        break;
    }
  }
  return plan;
}

ChoiceVariant normalizeChoice(ItemType type, bool flipped, ChoiceSide side,
                              std::optional<ChoiceSide> instructedSide) noexcept {
  // Unflipped display puts low (or the good control text) on the left.
  const bool choseFirst = (side == ChoiceSide::Left) != flipped;
  switch (type) {
    case ItemType::Critical:
      return choseFirst ? ChoiceVariant::Low : ChoiceVariant::High;
    case ItemType::Gotcha:
      return side == instructedSide.value_or(ChoiceSide::Left) ? ChoiceVariant::Correct : ChoiceVariant::Incorrect;
    case ItemType::Calibration:
    case ItemType::Proficiency:
      return choseFirst ? ChoiceVariant::Correct : ChoiceVariant::Incorrect;
  }
  return ChoiceVariant::Incorrect;
}

std::string_view toString(SessionStatus s) noexcept {
  switch (s) {
    case SessionStatus::Open:
      return "open";
    case SessionStatus::Complete:
      return "complete";
    case SessionStatus::Abandoned:
      return "abandoned";
  }
  return "open";
}

nlohmann::json TrialView::toJson() const {
  return {{"session_id", sessionId},       {"trial_index", trialIndex}, {"total_trials", totalTrials},
          {"instructions", instructions}, {"left_text", leftText},     {"right_text", rightText}};
}

void EventLog::append(const std::string& line) {
  std::lock_guard lock(mutex_);
  *out_ << line << '\n';
  out_->flush();
  if (!*out_) throw Error("event log write failed");
}

struct StudyService::SessionState {
  Session session;
  std::int64_t ordinal = 0;
  SessionStatus status = SessionStatus::Open;
  int next = 1;
  std::int64_t lastActivity = 0;
  std::vector<TrialRecord> records;
  mutable std::mutex mutex;
};

struct StudyService::State {
  mutable std::shared_mutex mutex;
  std::map<std::string, std::unique_ptr<SessionState>> sessions;
  std::map<std::string, std::string> latestByParticipant;
  std::int64_t nextOrdinal = 1;
  std::map<std::string, const ItemPair*> pairs;
  std::map<std::string, const ControlItem*> controls;
  std::map<std::string, const GotchaItem*> gotchas;
};

StudyService::StudyService(StudyConfig config, EventLog* log, Clock clock)
    : config_(std::move(config)), log_(log), clock_(std::move(clock)), state_(std::make_unique<State>()) {
  if (!clock_) throw ConfigError("study service needs a clock");
  if (config_.pairs.size() < config_.criticalPerSession) {
    throw ConfigError("study needs at least " + std::to_string(config_.criticalPerSession) +
                      " critical pairs, got " + std::to_string(config_.pairs.size()));
  }
  if (config_.calibration.itemId.empty()) throw ConfigError("study needs a calibration item");
  std::set<std::string> ids;
  auto claim = [&](const std::string& id) {
    if (id.empty() || !ids.insert(id).second) throw ConfigError("item id '" + id + "' is empty or not unique");
  };
  for (const auto& p : config_.pairs) {
    claim(p.abstractId);
    state_->pairs[p.abstractId] = &p;
  }
  claim(config_.calibration.itemId);
  state_->controls[config_.calibration.itemId] = &config_.calibration;
  for (const auto& c : config_.proficiency) {
    claim(c.itemId);
    state_->controls[c.itemId] = &c;
  }
  for (const auto& g : config_.gotchas) {
    claim(g.itemId);
    state_->gotchas[g.itemId] = &g;
  }
}

StudyService::~StudyService() = default;

StudyService::SessionState& StudyService::find(const std::string& sessionId) const {
  auto it = state_->sessions.find(sessionId);
  if (it == state_->sessions.end()) throw NotFoundError("unknown session '" + sessionId + "'");
  return *it->second;
}

std::string StudyService::textFor(const TrialSpec& spec, bool left) const {
  const std::string& vid = left ? spec.leftVariantId : spec.rightVariantId;
  switch (spec.itemType) {
    case ItemType::Critical: {
      const auto* p = state_->pairs.at(spec.itemId);
      return vid == p->low.variantId ? p->low.text : p->high.text;
    }
    case ItemType::Gotcha: {
      const auto* g = state_->gotchas.at(spec.itemId);
      return vid == kTextA ? g->textA : g->textB;
    }
    case ItemType::Calibration:
    case ItemType::Proficiency: {
      const auto* c = state_->controls.at(spec.itemId);
      return vid == kGood ? c->goodText : c->poorText;
    }
  }
  return {};
}

void StudyService::applySession(Session session, std::int64_t ordinal) {
  auto s = std::make_unique<SessionState>();
  s->ordinal = ordinal;
  s->lastActivity = session.createdAt;
  s->session = std::move(session);
  state_->latestByParticipant[s->session.participantId] = s->session.sessionId;
  state_->nextOrdinal = std::max(state_->nextOrdinal, ordinal + 1);
  const std::string id = s->session.sessionId;
  state_->sessions.emplace(id, std::move(s));
}

Session StudyService::createSession(const std::string& participantId) {
  if (text::trim(participantId).empty()) throw ValidationError("participant_id is required");
  std::unique_lock lock(state_->mutex);
  if (auto it = state_->latestByParticipant.find(participantId); it != state_->latestByParticipant.end()) {
    const auto& prev = find(it->second);
    std::lock_guard sl(prev.mutex);
    if (prev.status == SessionStatus::Open) {
      throw ConflictError("participant '" + participantId + "' already has an open session");
    }
  }
  Session s;
  s.participantId = participantId;
  s.seed = sessionSeed(config_.seed, participantId);
  s.plan = planSession(config_, s.seed);
  s.createdAt = clock_();
  const std::int64_t ordinal = state_->nextOrdinal;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06lld", static_cast<long long>(ordinal));
  s.sessionId = std::string("s") + buf + "-" + hex8(rnd::splitmix64(s.seed ^ static_cast<std::uint64_t>(ordinal)));

  if (log_) {
    nlohmann::ordered_json ev;
    ev["event"] = "session";
    ev["session_id"] = s.sessionId;
    ev["participant_id"] = s.participantId;
    ev["ordinal"] = ordinal;
    ev["seed"] = s.seed;
    ev["created_at"] = s.createdAt;
    auto plan = nlohmann::ordered_json::array();
    for (const auto& t : s.plan) plan.push_back(specJson(t));
    ev["plan"] = std::move(plan);
    log_->append(ev.dump());
  }
  applySession(s, ordinal);
  return s;
}

std::optional<TrialView> StudyService::nextTrial(const std::string& sessionId) const {
  std::shared_lock lock(state_->mutex);
  const auto& s = find(sessionId);
  std::lock_guard sl(s.mutex);
  if (s.status != SessionStatus::Open) return std::nullopt;
  const auto& spec = s.session.plan[static_cast<std::size_t>(s.next - 1)];
  TrialView v;
  v.sessionId = sessionId;
  v.trialIndex = spec.trialIndex;
  v.totalTrials = static_cast<int>(s.session.plan.size());
  v.instructions = config_.instructions;
  v.leftText = textFor(spec, true);
  v.rightText = textFor(spec, false);
  return v;
}

TrialRecord StudyService::buildRecord(const SessionState& s, const TrialSpec& spec, ChoiceSide side, double rtMs,
                                      std::int64_t ts) const {
  TrialRecord r;
  r.sessionId = s.session.sessionId;
  r.participantId = s.session.participantId;
  r.trialIndex = spec.trialIndex;
  r.itemId = spec.itemId;
  r.itemType = spec.itemType;
  r.flipped = spec.flipped;
  r.choiceSide = side;
  std::optional<ChoiceSide> instructed;
  if (spec.itemType == ItemType::Gotcha) instructed = state_->gotchas.at(spec.itemId)->instructedSide;
  r.choiceVariant = normalizeChoice(spec.itemType, spec.flipped, side, instructed);
  r.rtMs = rtMs;
  const auto left = text::utf8Length(textFor(spec, true));
  const auto right = text::utf8Length(textFor(spec, false));
  r.charLength = config_.charLength == CharLengthMode::Longer ? std::max(left, right) : left + right;
  r.ts = ts;
  return r;
}

ResponseResult StudyService::recordResponse(const std::string& sessionId, int trialIndex, ChoiceSide side,
                                            double rtMs) {
  if (!std::isfinite(rtMs) || rtMs <= 0) throw ValidationError("rt_ms must be a positive number");
  std::shared_lock lock(state_->mutex);
  auto& s = find(sessionId);
  std::lock_guard sl(s.mutex);
  if (trialIndex >= 1 && trialIndex < s.next) {
    throw ConflictError("trial " + std::to_string(trialIndex) + " of session '" + sessionId +
                        "' already has a response");
  }
  if (s.status != SessionStatus::Open) throw ConflictError("session '" + sessionId + "' is closed");
  if (trialIndex != s.next) {
    throw SequencingError("expected a response to trial " + std::to_string(s.next) + ", got " +
                          std::to_string(trialIndex));
  }
  const auto& spec = s.session.plan[static_cast<std::size_t>(trialIndex - 1)];
  ResponseResult out;
  out.record = buildRecord(s, spec, side, rtMs, clock_());
  out.tooFast = rtMs < speedFloor(static_cast<double>(out.record.charLength), config_.speedFactor);

  if (log_) log_->append(toJsonLine(out.record));
  s.records.push_back(out.record);
  s.lastActivity = out.record.ts;
  if (++s.next > static_cast<int>(s.session.plan.size())) s.status = SessionStatus::Complete;
  return out;
}

std::size_t StudyService::expireIdle(std::int64_t now) {
  std::unique_lock lock(state_->mutex);
  std::size_t n = 0;
  for (auto& [id, s] : state_->sessions) {
    std::lock_guard sl(s->mutex);
    if (s->status != SessionStatus::Open || now - s->lastActivity <= config_.idleTimeoutMs) continue;
    if (log_) {
      nlohmann::ordered_json ev;
      ev["event"] = "abandoned";
      ev["session_id"] = id;
      ev["ts"] = now;
      log_->append(ev.dump());
    }
    s->status = SessionStatus::Abandoned;
    ++n;
  }
  return n;
}

std::vector<TrialRecord> StudyService::exportRecords() const {
  std::shared_lock lock(state_->mutex);
  std::vector<const SessionState*> ordered;
  for (const auto& [id, s] : state_->sessions) ordered.push_back(s.get());
  std::sort(ordered.begin(), ordered.end(),
            [](const SessionState* a, const SessionState* b) { return a->ordinal < b->ordinal; });
  std::vector<TrialRecord> out;
  for (const auto* s : ordered) {
    std::lock_guard sl(s->mutex);
    out.insert(out.end(), s->records.begin(), s->records.end());
  }
  return out;
}

void StudyService::writeExport(std::ostream& out) const {
  for (const auto& r : exportRecords()) out << toJsonLine(r) << '\n';
}

std::string StudyService::snapshot() const {
  std::shared_lock lock(state_->mutex);
  std::vector<const SessionState*> ordered;
  for (const auto& [id, s] : state_->sessions) ordered.push_back(s.get());
  std::sort(ordered.begin(), ordered.end(),
            [](const SessionState* a, const SessionState* b) { return a->ordinal < b->ordinal; });
  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  for (const auto* s : ordered) {
    std::lock_guard sl(s->mutex);
    nlohmann::ordered_json j;
    j["session_id"] = s->session.sessionId;
    j["participant_id"] = s->session.participantId;
    j["ordinal"] = s->ordinal;
    j["seed"] = s->session.seed;
    j["created_at"] = s->session.createdAt;
    j["status"] = std::string(toString(s->status));
    j["next_trial"] = s->next;
    j["last_activity"] = s->lastActivity;
    auto plan = nlohmann::ordered_json::array();
    for (const auto& t : s->session.plan) plan.push_back(specJson(t));
    j["plan"] = std::move(plan);
    auto recs = nlohmann::ordered_json::array();
    for (const auto& r : s->records) recs.push_back(nlohmann::ordered_json::parse(toJsonLine(r)));
    j["records"] = std::move(recs);
    all.push_back(std::move(j));
  }
  return all.dump();
}

void StudyService::replay(std::istream& in) {
  std::unique_lock lock(state_->mutex);
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineNo, std::string("malformed event: ") + e.what());
    }
    try {
      const std::string event = j.value("event", std::string{});
      if (event == "session") {
        Session s;
        s.sessionId = j.at("session_id").get<std::string>();
        s.participantId = j.at("participant_id").get<std::string>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.createdAt = j.at("created_at").get<std::int64_t>();
        for (const auto& t : j.at("plan")) {
          auto spec = specFromJson(t);
          const bool known = spec.itemType == ItemType::Critical  ? state_->pairs.count(spec.itemId) > 0
                             : spec.itemType == ItemType::Gotcha ? state_->gotchas.count(spec.itemId) > 0
                                                                 : state_->controls.count(spec.itemId) > 0;
          if (!known) throw ParseError(lineNo, "session plan refers to unknown item '" + spec.itemId + "'");
          s.plan.push_back(std::move(spec));
        }
        if (state_->sessions.count(s.sessionId)) throw ParseError(lineNo, "duplicate session event");
        applySession(std::move(s), j.at("ordinal").get<std::int64_t>());
      } else if (event == "abandoned") {
        auto& s = find(j.at("session_id").get<std::string>());
        s.status = SessionStatus::Abandoned;
      } else if (event.empty()) {
        auto rec = trialRecordFromJson(line, lineNo);
        auto& s = find(rec.sessionId);
        if (s.status != SessionStatus::Open || rec.trialIndex != s.next) {
          throw ParseError(lineNo, "response out of sequence for session '" + rec.sessionId + "'");
        }
        s.lastActivity = rec.ts;
        s.records.push_back(std::move(rec));
        if (++s.next > static_cast<int>(s.session.plan.size())) s.status = SessionStatus::Complete;
      } else {
        throw ParseError(lineNo, "unknown event '" + event + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineNo, std::string("bad event: ") + e.what());
    }
  }
}

}  // namespace lexdrift
