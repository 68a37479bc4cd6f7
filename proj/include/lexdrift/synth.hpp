#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lexdrift/corpus.hpp"
#include "lexdrift/records.hpp"
#include "lexdrift/study.hpp"

// Seeded synthetic data for tests, demos and the end-to-end smoke run. Nothing here touches a network.
namespace lexdrift::synth {

/// Lemmas the "instruct" side overuses.
const std::vector<LemmaKey>& overusedKeys();

struct CorpusSpec {
  std::size_t documents = 1000;
  std::size_t minTokens = 60;
  std::size_t maxTokens = 140;  // length target; the last sentence is completed, so documents may run past it
  double boost = 1.0;  // weight multiplier for overused lemmas; 1 gives the base distribution
  std::string idPrefix = "doc";
  std::uint64_t seed = 1;
};

Corpus makeCorpus(const CorpusSpec& spec);

struct VariantSpec {
  std::size_t abstracts = 50;
  std::size_t perAbstract = 10;
  std::size_t minWords = 86;  // deliberately a little wider than the default 90..110 filter
  std::size_t maxWords = 114;
  double maxBoost = 15.0;
  std::uint64_t seed = 1;
};

/// Tagged variant records carrying abstract_id/variant_id and a raw text.
Corpus makeVariants(const VariantSpec& spec);

struct RatingSpec {
  std::size_t users = 200;
  std::size_t items = 30;
  double beta = 0.52;
  double sigma2User = 0.10;
  double sigma2Item = 0.006;
  std::uint64_t seed = 1;
};

/// Binary high/low ratings from a linear probability model. Participant effects are ±sqrt(σ²_u) and item
/// effects are uniform on ±sqrt(3σ²_v), so with the defaults every probability stays inside (0, 1)
/// and the generating variances hold exactly.
std::vector<Rating> simulateRatings(const RatingSpec& spec);

struct StudySimSpec {
  std::size_t participants = 60;
  double beta = 0.52;
  double sigma2User = 0.10;
  double sigma2Item = 0.006;
  double incompleteRate = 0.05;
  double gotchaFailRate = 0.08;
  double speederRate = 0.04;
  double fastRatingRate = 0.02;
  double controlAccuracy = 0.9;
  std::int64_t startMs = 1'700'000'000'000;
  std::uint64_t seed = 1;
};

struct StudySimResult {
  std::vector<TrialRecord> records;
  std::string eventLog;
};

/// Drives an in-memory StudyService with scripted participants on a simulated clock.
StudySimResult simulateStudy(const StudyConfig& config, const StudySimSpec& spec);

}  // namespace lexdrift::synth
