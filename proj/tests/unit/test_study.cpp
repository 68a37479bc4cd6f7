#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "lexdrift/error.hpp"
#include "lexdrift/qc.hpp"
#include "lexdrift/study.hpp"
#include "study_fixture.hpp"

using namespace lexdrift;

namespace {

struct FakeClock {
  std::int64_t now = 1'700'000'000'000;
  StudyService::Clock fn() {
    return [this] { return now; };
  }
};

// Answers every trial of a session on the left, with a comfortable reading time.
void completeSession(StudyService& svc, const std::string& id, double rt = 30000) {
  while (auto v = svc.nextTrial(id)) svc.recordResponse(id, v->trialIndex, ChoiceSide::Left, rt);
}

}  // namespace

TEST(PlanSession, Composition) {
  const auto cfg = fixture::config();
  const auto plan = planSession(cfg, 123);
  ASSERT_EQ(plan.size(), 25u);
  EXPECT_EQ(plan[0].itemType, ItemType::Calibration);
  std::map<ItemType, int> counts;
  std::set<std::string> critical;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    EXPECT_EQ(plan[i].trialIndex, static_cast<int>(i + 1));
    ++counts[plan[i].itemType];
    if (plan[i].itemType == ItemType::Critical) {
      critical.insert(plan[i].itemId);
      const auto& lo = plan[i].itemId + "-lo";
      const auto& hi = plan[i].itemId + "-hi";
      EXPECT_EQ(plan[i].leftVariantId, plan[i].flipped ? hi : lo);
      EXPECT_EQ(plan[i].rightVariantId, plan[i].flipped ? lo : hi);
    }
  }
  EXPECT_EQ(counts[ItemType::Calibration], 1);
  EXPECT_EQ(counts[ItemType::Critical], 20);
  EXPECT_EQ(counts[ItemType::Gotcha], 2);
  EXPECT_EQ(counts[ItemType::Proficiency], 2);
  EXPECT_EQ(critical.size(), 20u);
}

TEST(PlanSession, DeterministicAndSeedSensitive) {
  const auto cfg = fixture::config(30);
  const auto a = planSession(cfg, 5), b = planSession(cfg, 5), c = planSession(cfg, 6);
  auto key = [](const std::vector<TrialSpec>& p) {
    std::string s;
    for (const auto& t : p) s += t.itemId + (t.flipped ? "!" : ".");
    return s;
  };
  EXPECT_EQ(key(a), key(b));
  EXPECT_NE(key(a), key(c));
  EXPECT_EQ(sessionSeed(1, "p"), sessionSeed(1, "p"));
  EXPECT_NE(sessionSeed(1, "p"), sessionSeed(2, "p"));
}

TEST(StudyConfig, Validation) {
  FakeClock clock;
  EXPECT_THROW(StudyService(fixture::config(19), nullptr, clock.fn()), ConfigError);
  auto noCal = fixture::config();
  noCal.calibration.itemId.clear();
  EXPECT_THROW(StudyService(noCal, nullptr, clock.fn()), ConfigError);
  auto dup = fixture::config();
  dup.gotchas[1].itemId = dup.gotchas[0].itemId;
  EXPECT_THROW(StudyService(dup, nullptr, clock.fn()), ConfigError);
  EXPECT_NO_THROW(StudyService(fixture::config(25), nullptr, clock.fn()));
}

TEST(NormalizeChoice, Mapping) {
  EXPECT_EQ(normalizeChoice(ItemType::Critical, false, ChoiceSide::Left), ChoiceVariant::Low);
  EXPECT_EQ(normalizeChoice(ItemType::Critical, false, ChoiceSide::Right), ChoiceVariant::High);
  EXPECT_EQ(normalizeChoice(ItemType::Critical, true, ChoiceSide::Left), ChoiceVariant::High);
  EXPECT_EQ(normalizeChoice(ItemType::Gotcha, false, ChoiceSide::Right, ChoiceSide::Left), ChoiceVariant::Incorrect);
  EXPECT_EQ(normalizeChoice(ItemType::Gotcha, true, ChoiceSide::Left, ChoiceSide::Left), ChoiceVariant::Correct);
  EXPECT_EQ(normalizeChoice(ItemType::Proficiency, false, ChoiceSide::Left), ChoiceVariant::Correct);
  EXPECT_EQ(normalizeChoice(ItemType::Proficiency, true, ChoiceSide::Left), ChoiceVariant::Incorrect);
}

TEST(NormalizeChoice, FlipInvolution) {
  // Flipping the display and mirroring the click leaves the normalized choice unchanged.
  const auto mirror = [](ChoiceSide s) { return s == ChoiceSide::Left ? ChoiceSide::Right : ChoiceSide::Left; };
  for (auto type : {ItemType::Calibration, ItemType::Critical, ItemType::Proficiency}) {
    for (bool flipped : {false, true}) {
      for (auto side : {ChoiceSide::Left, ChoiceSide::Right}) {
        EXPECT_EQ(normalizeChoice(type, flipped, side), normalizeChoice(type, !flipped, mirror(side)));
      }
    }
  }
}

TEST(StudyService, TrialFlowAndViews) {
  FakeClock clock;
  auto cfg = fixture::config();
  StudyService svc(cfg, nullptr, clock.fn());
  const auto s = svc.createSession("p1");
  EXPECT_THROW(svc.createSession("p1"), ConflictError);
  EXPECT_THROW(svc.nextTrial("nope"), NotFoundError);

  const auto first = svc.nextTrial(s.sessionId);
  ASSERT_TRUE(first);
  EXPECT_EQ(first->trialIndex, 1);
  EXPECT_EQ(first->totalTrials, 25);
  EXPECT_EQ(svc.nextTrial(s.sessionId)->leftText, first->leftText);  // idempotent read

  std::set<std::string> keys;
  const auto firstJson = first->toJson();
  for (const auto& [k, v] : firstJson.items()) keys.insert(k);
  for (int t = 1; t <= 25; ++t) {
    const auto v = svc.nextTrial(s.sessionId);
    ASSERT_TRUE(v);
    std::set<std::string> k;
    const auto j = v->toJson();
    for (const auto& [key, val] : j.items()) k.insert(key);
    EXPECT_EQ(k, keys);  // blinding: every item type has the same shape
    const auto& spec = s.plan[t - 1];
    if (spec.itemType == ItemType::Gotcha) {
      EXPECT_NE((v->leftText + v->rightText).find("This is not a real item, please click on the left button."),
                std::string::npos);
    }
    if (spec.itemType == ItemType::Critical) {
      EXPECT_EQ(v->leftText[0], spec.flipped ? 'H' : 'L');
    }
    svc.recordResponse(s.sessionId, t, ChoiceSide::Left, 30000);
  }
  EXPECT_FALSE(svc.nextTrial(s.sessionId));
  EXPECT_THROW(svc.recordResponse(s.sessionId, 26, ChoiceSide::Left, 1), ConflictError);
  EXPECT_NO_THROW(svc.createSession("p1"));  // previous one is complete
}

TEST(StudyService, ResponseRules) {
  FakeClock clock;
  StudyService svc(fixture::config(), nullptr, clock.fn());
  const auto s = svc.createSession("p1");
  EXPECT_THROW(svc.recordResponse(s.sessionId, 2, ChoiceSide::Left, 5000), SequencingError);
  EXPECT_THROW(svc.recordResponse(s.sessionId, 1, ChoiceSide::Left, 0), ValidationError);
  EXPECT_THROW(svc.recordResponse(s.sessionId, 1, ChoiceSide::Left, std::nan("")), ValidationError);
  const auto first = svc.recordResponse(s.sessionId, 1, ChoiceSide::Left, 5000);
  EXPECT_THROW(svc.recordResponse(s.sessionId, 1, ChoiceSide::Right, 5000), ConflictError);
  EXPECT_EQ(svc.exportRecords().size(), 1u);
  EXPECT_EQ(svc.exportRecords()[0].choiceSide, ChoiceSide::Left);  // first write wins
  EXPECT_EQ(first.record.trialIndex, 1);
}

TEST(StudyService, TooFastFlagAtHundredChars) {
  FakeClock clock;
  auto cfg = fixture::config();
  cfg.calibration.goodText = std::string(100, 'g');
  cfg.calibration.poorText = std::string(60, 'p');
  StudyService svc(cfg, nullptr, clock.fn());
  const auto s = svc.createSession("p1");
  const auto r = svc.recordResponse(s.sessionId, 1, ChoiceSide::Left, 1000);
  EXPECT_EQ(r.record.charLength, 100u);
  EXPECT_TRUE(r.tooFast);  // floor is 1090 ms
  const auto r2 = svc.recordResponse(s.sessionId, 2, ChoiceSide::Left, 1e6);
  EXPECT_FALSE(r2.tooFast);
}

TEST(StudyService, CharLengthSumMode) {
  FakeClock clock;
  auto cfg = fixture::config();
  cfg.calibration.goodText = std::string(100, 'g');
  cfg.calibration.poorText = std::string(60, 'p');
  cfg.charLength = CharLengthMode::Sum;
  StudyService svc(cfg, nullptr, clock.fn());
  const auto s = svc.createSession("p1");
  EXPECT_EQ(svc.recordResponse(s.sessionId, 1, ChoiceSide::Left, 9000).record.charLength, 160u);
}

TEST(StudyService, CriticalNormalizationThroughService) {
  FakeClock clock;
  StudyService svc(fixture::config(), nullptr, clock.fn());
  const auto s = svc.createSession("p1");
  for (const auto& spec : s.plan) {
    const auto r = svc.recordResponse(s.sessionId, spec.trialIndex, ChoiceSide::Left, 20000);
    if (spec.itemType == ItemType::Critical) {
      EXPECT_EQ(r.record.choiceVariant, spec.flipped ? ChoiceVariant::High : ChoiceVariant::Low);
    }
    if (spec.itemType == ItemType::Gotcha) EXPECT_EQ(r.record.choiceVariant, ChoiceVariant::Correct);
  }
}

TEST(StudyService, ReplayReconstructsSnapshot) {
  FakeClock clock;
  std::ostringstream logText;
  EventLog log(logText);
  StudyService svc(fixture::config(24), &log, clock.fn());
  for (int p = 0; p < 6; ++p) {
    const auto s = svc.createSession("p" + std::to_string(p));
    for (int t = 1; t <= 3 + p * 4 && t <= 25; ++t) {
      clock.now += 7000;
      svc.recordResponse(s.sessionId, t, t % 2 ? ChoiceSide::Left : ChoiceSide::Right, 6000 + t);
    }
  }
  clock.now += 25LL * 3600 * 1000;
  EXPECT_GT(svc.expireIdle(clock.now), 0u);

  FakeClock other;
  StudyService copy(fixture::config(24), nullptr, other.fn());
  std::istringstream in(logText.str());
  copy.replay(in);
  EXPECT_EQ(copy.snapshot(), svc.snapshot());
  std::ostringstream a, b;
  svc.writeExport(a);
  copy.writeExport(b);
  EXPECT_EQ(a.str(), b.str());

  std::istringstream broken("{\"event\":\"nonsense\"}\n");
  StudyService bad(fixture::config(24), nullptr, other.fn());
  EXPECT_THROW(bad.replay(broken), ParseError);
}

TEST(StudyService, RecordsAreGapFreePrefixes) {
  FakeClock clock;
  StudyService svc(fixture::config(), nullptr, clock.fn());
  for (int p = 0; p < 10; ++p) {
    const auto s = svc.createSession("p" + std::to_string(p));
    for (int t = 1; t <= p * 2; ++t) svc.recordResponse(s.sessionId, t, ChoiceSide::Right, 9000);
  }
  std::map<std::string, std::vector<int>> bySession;
  for (const auto& r : svc.exportRecords()) bySession[r.sessionId].push_back(r.trialIndex);
  for (const auto& [sid, idx] : bySession) {
    for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(idx[i], static_cast<int>(i + 1));
  }
}

TEST(StudyService, ExpireIdleMarksAbandoned) {
  FakeClock clock;
  StudyService svc(fixture::config(), nullptr, clock.fn());
  const auto s = svc.createSession("p1");
  svc.recordResponse(s.sessionId, 1, ChoiceSide::Left, 9000);
  EXPECT_EQ(svc.expireIdle(clock.now + 1000), 0u);
  EXPECT_EQ(svc.expireIdle(clock.now + 24LL * 3600 * 1000 + 1), 1u);
  EXPECT_FALSE(svc.nextTrial(s.sessionId));
  EXPECT_THROW(svc.recordResponse(s.sessionId, 2, ChoiceSide::Left, 9000), ConflictError);
  // The partial records still reach QC, which applies the minimum-items rule.
  const auto qc = applyExclusions(svc.exportRecords());
  EXPECT_EQ(qc.report.excludedIncomplete.size(), 1u);
}

TEST(StudyService, ConcurrentSessions) {
  FakeClock clock;
  std::ostringstream logText;
  EventLog log(logText);
  StudyService svc(fixture::config(30), &log, clock.fn());
  std::vector<std::thread> threads;
  for (int w = 0; w < 8; ++w) {
    threads.emplace_back([&, w] {
      for (int p = 0; p < 10; ++p) {
        const auto s = svc.createSession("w" + std::to_string(w) + "p" + std::to_string(p));
        completeSession(svc, s.sessionId);
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(svc.exportRecords().size(), 8u * 10 * 25);

  StudyService copy(fixture::config(30), nullptr, clock.fn());
  std::istringstream in(logText.str());
  copy.replay(in);
  EXPECT_EQ(copy.snapshot(), svc.snapshot());
}

TEST(StudyService, DuplicateResponsesUnderContention) {
  FakeClock clock;
  StudyService svc(fixture::config(), nullptr, clock.fn());
  const auto s = svc.createSession("p1");
  std::atomic<int> accepted{0}, conflicts{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      try {
        svc.recordResponse(s.sessionId, 1, ChoiceSide::Left, 5000);
        ++accepted;
      } catch (const ConflictError&) {
        ++conflicts;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(accepted.load(), 1);
  EXPECT_EQ(conflicts.load(), 7);
}

TEST(Controls, LoadFromJson) {
  auto cfg = fixture::config();
  loadControls(cfg, nlohmann::json::parse(R"({
    "calibration": {"item_id": "cal", "good_text": "Good.", "poor_text": "bad bad"},
    "gotchas": [{"item_id": "g1", "text_a": "Click right.", "text_b": "x", "instructed_side": "right"},
                {"item_id": "g2", "text_a": "Click left.", "text_b": "y", "instructed_side": "left"}],
    "proficiency": [{"item_id": "pr1", "good_text": "a", "poor_text": "b"},
                    {"item_id": "pr2", "good_text": "c", "poor_text": "d"}]})"));
  EXPECT_EQ(cfg.calibration.itemId, "cal");
  EXPECT_EQ(cfg.gotchas[0].instructedSide, ChoiceSide::Right);
  EXPECT_THROW(loadControls(cfg, nlohmann::json::parse(
                                     R"({"gotchas":[{"item_id":"g","text_a":"a","text_b":"b","instructed_side":"up"}]})")),
               ConfigError);
}
