#include "lexdrift/qc.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "lexdrift/error.hpp"
#include "lexdrift/text.hpp"

namespace lexdrift {

QcResult applyExclusions(const std::vector<TrialRecord>& records, const QcConfig& config) {
  std::vector<std::string> missing;
  for (const auto& r : records) {
    if (!r.rtMs) missing.push_back(r.participantId + "#" + std::to_string(r.trialIndex));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ValidationError("records without rt_ms: " + list);
  }

  std::map<std::string, std::vector<const TrialRecord*>> byParticipant;
  for (const auto& r : records) byParticipant[r.participantId].push_back(&r);

  QcResult out;
  auto& rep = out.report;
  rep.participants = byParticipant.size();
  for (auto& [pid, recs] : byParticipant) {
    std::sort(recs.begin(), recs.end(), [](const TrialRecord* a, const TrialRecord* b) {
      if (a->sessionId != b->sessionId) return a->sessionId < b->sessionId;
      if (a->trialIndex != b->trialIndex) return a->trialIndex < b->trialIndex;
      return a->itemId < b->itemId;
    });
    std::size_t critical = 0, gotchaCorrect = 0, fast = 0;
    for (const auto* r : recs) {
      critical += r->itemType == ItemType::Critical;
      if (r->itemType == ItemType::Gotcha && r->choiceVariant == ChoiceVariant::Correct) ++gotchaCorrect;
      if (*r->rtMs < speedFloor(static_cast<double>(r->charLength), config.speedFactor)) ++fast;
    }
    rep.inputCriticalRatings += critical;

    if (recs.size() < config.minItems) {
      rep.excludedIncomplete.push_back(pid);
      rep.droppedIncompleteRatings += critical;
      continue;
    }
    const bool gotchaFail = config.gotchaRule == GotchaRule::Strict ? gotchaCorrect < config.gotchaItems
                                                                    : gotchaCorrect == 0;
    if (gotchaFail) {
      rep.excludedGotcha.push_back(pid);
      rep.droppedGotchaRatings += critical;
      continue;
    }
    if (fast >= config.fastTrialLimit) {
      rep.excludedSpeed.push_back(pid);
      rep.droppedSpeedRatings += critical;
      continue;
    }
    rep.retainedBeforeFastDrops += critical;
    for (const auto* r : recs) {
      if (r->itemType != ItemType::Critical) continue;
      if (*r->rtMs < speedFloor(static_cast<double>(r->charLength), config.speedFactor)) {
        ++rep.excludedFastRatings;
        continue;
      }
      out.retained.push_back({r->participantId, r->itemId, r->choiceVariant, *r->rtMs});
    }
  }
  rep.retainedRatings = out.retained.size();
  return out;
}

void writeRetainedCsv(std::ostream& out, const std::vector<Rating>& ratings) {
  out << "participant_id,item_id,choice_variant,rt_ms\n";
  for (const auto& r : ratings) {
    out << text::csvField(r.participantId) << ',' << text::csvField(r.itemId) << ',' << toString(r.choice) << ','
        << text::shortest(r.rtMs) << '\n';
  }
}

std::vector<Rating> readRetainedCsv(std::istream& in) {
  const auto csv = text::readCsv(in);
  const auto cP = csv.column("participant_id"), cI = csv.column("item_id"), cC = csv.column("choice_variant"),
             cR = csv.column("rt_ms");
  std::vector<Rating> out;
  out.reserve(csv.rows.size());
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& f = csv.rows[i];
    auto choice = parseChoiceVariant(f[cC]);
    if (!choice) throw ParseError(i + 2, "unknown choice_variant '" + f[cC] + "'");
    double rt = 0;
    try {
      rt = std::stod(f[cR]);
    } catch (const std::logic_error&) {
      throw ParseError(i + 2, "bad rt_ms '" + f[cR] + "'");
    }
    out.push_back({f[cP], f[cI], *choice, rt});
  }
  return out;
}

std::string toJson(const ExclusionReport& r, const QcConfig& c) {
  nlohmann::ordered_json j;
  j["config"] = {{"min_items", c.minItems},
                 {"speed_factor", c.speedFactor},
                 {"fast_trial_limit", c.fastTrialLimit},
                 {"gotcha_rule", c.gotchaRule == GotchaRule::Strict ? "strict" : "lenient"}};
  j["participants"] = r.participants;
  j["excluded_incomplete"] = r.excludedIncomplete;
  j["excluded_gotcha"] = r.excludedGotcha;
  j["excluded_speed"] = r.excludedSpeed;
  j["excluded_fast_ratings"] = r.excludedFastRatings;
  j["retained_ratings"] = r.retainedRatings;
  j["counts"] = {{"incomplete", r.excludedIncomplete.size()},
                 {"gotcha", r.excludedGotcha.size()},
                 {"speed", r.excludedSpeed.size()}};
  j["ratings"] = {{"input_critical", r.inputCriticalRatings},
                  {"dropped_incomplete", r.droppedIncompleteRatings},
                  {"dropped_gotcha", r.droppedGotchaRatings},
                  {"dropped_speed", r.droppedSpeedRatings},
                  {"retained_before_fast_drops", r.retainedBeforeFastDrops},
                  {"dropped_fast", r.excludedFastRatings},
                  {"retained", r.retainedRatings}};
  return j.dump(2);
}

std::string renderText(const ExclusionReport& r) {
  std::string s;
  s += "participants: " + std::to_string(r.participants) + "\n";
  s += "excluded (fewer than the minimum items): " + std::to_string(r.excludedIncomplete.size()) + "\n";
  s += "excluded (gotcha items): " + std::to_string(r.excludedGotcha.size()) + "\n";
  s += "excluded (too many fast ratings): " + std::to_string(r.excludedSpeed.size()) + "\n";
  s += "individually dropped fast ratings: " + std::to_string(r.excludedFastRatings) + "\n";
  s += "retained ratings: " + std::to_string(r.retainedRatings) + " of " + std::to_string(r.inputCriticalRatings) +
       " critical\n";
  return s;
}

}  // namespace lexdrift
