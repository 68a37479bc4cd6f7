#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "lexdrift/error.hpp"
#include "lexdrift/qc.hpp"

using namespace lexdrift;

namespace {

struct Plan {
  int trials = 25;
  int gotchaCorrect = 2;
  int fastCritical = 0;
};

// Calibration first, gotchas at 5 and 15, proficiency at 8 and 20, critical elsewhere.
std::vector<TrialRecord> participant(const std::string& pid, Plan plan) {
  std::vector<TrialRecord> out;
  int gotchaSeen = 0, fast = 0;
  for (int t = 1; t <= plan.trials; ++t) {
    TrialRecord r;
    r.sessionId = "s-" + pid;
    r.participantId = pid;
    r.trialIndex = t;
    r.charLength = 600;
    r.rtMs = 20000;
    if (t == 1) {
      r.itemType = ItemType::Calibration;
      r.choiceVariant = ChoiceVariant::Correct;
    } else if (t == 5 || t == 15) {
      r.itemType = ItemType::Gotcha;
      r.choiceVariant = gotchaSeen++ < plan.gotchaCorrect ? ChoiceVariant::Correct : ChoiceVariant::Incorrect;
    } else if (t == 8 || t == 20) {
      r.itemType = ItemType::Proficiency;
      r.choiceVariant = ChoiceVariant::Correct;
    } else {
      r.itemType = ItemType::Critical;
      r.choiceVariant = t % 2 ? ChoiceVariant::High : ChoiceVariant::Low;
      if (fast < plan.fastCritical) {
        r.rtMs = 500;
        ++fast;
      }
    }
    r.itemId = "i" + std::to_string(t);
    out.push_back(r);
  }
  return out;
}

std::vector<TrialRecord> cohort(std::vector<std::pair<std::string, Plan>> plans) {
  std::vector<TrialRecord> out;
  for (const auto& [pid, plan] : plans) {
    const auto p = participant(pid, plan);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace

TEST(SpeedFloor, Examples) {
  EXPECT_DOUBLE_EQ(speedFloor(100), 1090.0);
  EXPECT_DOUBLE_EQ(speedFloor(0), 90.0);
  EXPECT_DOUBLE_EQ(speedFloor(500), 5090.0);
  EXPECT_DOUBLE_EQ(speedFloor(100, 1.0), 2725.0);
}

TEST(Exclusions, RuleExamples) {
  const auto res = applyExclusions(cohort({{"ok", {}},
                                           {"nine", {9, 2, 0}},
                                           {"halfgotcha", {25, 1, 0}},
                                           {"fast5", {25, 2, 5}},
                                           {"fast4", {25, 2, 4}}}));
  const auto& r = res.report;
  EXPECT_EQ(r.excludedIncomplete, std::vector<std::string>{"nine"});
  EXPECT_EQ(r.excludedGotcha, std::vector<std::string>{"halfgotcha"});
  EXPECT_EQ(r.excludedSpeed, std::vector<std::string>{"fast5"});
  EXPECT_EQ(r.excludedFastRatings, 4u);
  EXPECT_EQ(r.retainedRatings, 20u + 16u);
  EXPECT_EQ(res.retained.size(), r.retainedRatings);
  EXPECT_TRUE(r.reconciles());
  for (const auto& x : res.retained) EXPECT_TRUE(x.choice == ChoiceVariant::Low || x.choice == ChoiceVariant::High);
}

TEST(Exclusions, RuleOrderAttributesFirstMatch) {
  // Incomplete and failing gotchas: counted once, as incomplete.
  const auto r = applyExclusions(cohort({{"both", {8, 0, 5}}})).report;
  EXPECT_EQ(r.excludedIncomplete.size(), 1u);
  EXPECT_TRUE(r.excludedGotcha.empty());
  EXPECT_TRUE(r.excludedSpeed.empty());
}

TEST(Exclusions, LenientGotchaRule) {
  QcConfig c;
  c.gotchaRule = GotchaRule::Lenient;
  const auto r = applyExclusions(cohort({{"one", {25, 1, 0}}, {"none", {25, 0, 0}}}), c).report;
  EXPECT_EQ(r.excludedGotcha, std::vector<std::string>{"none"});
  // Ten items before either gotcha: the strict rule treats the missing gotchas as failures.
  EXPECT_EQ(applyExclusions(cohort({{"short", {4, 2, 0}}}), {3}).report.excludedGotcha.size(), 1u);
}

TEST(Exclusions, MissingRtListsOffenders) {
  auto recs = cohort({{"a", {}}});
  recs[3].rtMs.reset();
  try {
    applyExclusions(recs);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("a#4"), std::string::npos);
  }
}

TEST(Exclusions, DeterministicUnderShuffle) {
  auto recs = cohort({{"a", {}}, {"b", {9}}, {"c", {25, 1}}, {"d", {25, 2, 6}}, {"e", {25, 2, 3}}, {"f", {12}}});
  const auto ref = applyExclusions(recs);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(recs.begin(), recs.end(), rng);
    const auto got = applyExclusions(recs);
    EXPECT_EQ(toJson(got.report, {}), toJson(ref.report, {}));
    std::ostringstream x, y;
    writeRetainedCsv(x, got.retained);
    writeRetainedCsv(y, ref.retained);
    EXPECT_EQ(x.str(), y.str());
  }
}

TEST(Exclusions, MonotoneInThresholdsAndPartition) {
  std::mt19937_64 rng(99);
  std::vector<std::pair<std::string, Plan>> plans;
  for (int i = 0; i < 60; ++i) {
    plans.push_back({"p" + std::to_string(100 + i),
                     {static_cast<int>(3 + rng() % 23), static_cast<int>(rng() % 3), static_cast<int>(rng() % 9)}});
  }
  const auto recs = cohort(plans);
  std::size_t last = 0;
  for (std::size_t minItems = 25; minItems >= 1; --minItems) {
    QcConfig c;
    c.minItems = minItems;
    c.gotchaRule = GotchaRule::Lenient;
    const auto r = applyExclusions(recs, c).report;
    EXPECT_GE(r.retainedRatings, last);  // raising min_items can only remove ratings
    EXPECT_TRUE(r.reconciles());
    last = r.retainedRatings;
  }
  last = 0;
  for (std::size_t limit = 1; limit <= 12; ++limit) {
    QcConfig c;
    c.fastTrialLimit = limit;
    const auto r = applyExclusions(recs, c).report;
    EXPECT_GE(r.retainedRatings, last);
    EXPECT_TRUE(r.reconciles());
    last = r.retainedRatings;
  }
}

TEST(RetainedCsv, RoundTrip) {
  const auto res = applyExclusions(cohort({{"a", {}}}));
  std::stringstream s;
  writeRetainedCsv(s, res.retained);
  const auto back = readRetainedCsv(s);
  ASSERT_EQ(back.size(), res.retained.size());
  EXPECT_EQ(back[0].participantId, "a");
  EXPECT_EQ(back[0].rtMs, 20000.0);
  EXPECT_NE(renderText(res.report).find("retained ratings: 20 of 20 critical"), std::string::npos);
}
