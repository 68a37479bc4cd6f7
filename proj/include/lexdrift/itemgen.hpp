#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lexdrift/corpus.hpp"
#include "lexdrift/error.hpp"
#include "lexdrift/scoring.hpp"

namespace lexdrift {

struct Variant {
  std::string abstractId;
  std::string variantId;
  std::string text;
  std::vector<TaggedToken> tokens;
  std::size_t wordCount = 0;
  double lhfScore = 0;
};

/// Builds a scored variant from a tagged record (abstract_id/variant_id default to doc_id).
Variant makeVariant(const Document& doc, const ScoreTable& table);

/// Words reported as overused in the LLM-text literature; the default banned list.
const std::vector<std::string>& defaultBannedWords();

struct FilterConfig {
  std::size_t minWords = 90;
  std::size_t maxWords = 110;
  std::vector<std::string> banned = defaultBannedWords();
};

std::vector<Variant> filterVariants(std::vector<Variant> variants, const FilterConfig& config = {});

struct ItemPair {
  std::string abstractId;
  Variant low;
  Variant high;
  double delta = 0;
  std::size_t lengthDiff = 0;
};

ItemPair makePair(const Variant& low, const Variant& high);

/// One abstract's extreme pair plus its variants sorted by (score asc, variant id asc) for runner-ups.
struct Candidate {
  ItemPair extreme;
  std::vector<Variant> variants;
};

struct CandidateSet {
  std::vector<Candidate> candidates;  // abstract id order
  std::vector<std::string> warnings;
};

CandidateSet pairPerAbstract(const std::vector<Variant>& variants);

/// Largest-delta pair of distinct variants with |length difference| <= lengthTol.
/// Ties prefer the lower low-variant id, then the lower high-variant id.
std::optional<ItemPair> bestAdmissiblePair(const Candidate& candidate, std::size_t lengthTol);

enum class RunnerUpMode { WithinAbstract, AbstractReplacement };

struct SelectConfig {
  std::size_t k = 30;
  std::size_t lengthTol = 2;
  RunnerUpMode mode = RunnerUpMode::WithinAbstract;
};

class InsufficientPairsError : public ValidationError {
 public:
  InsufficientPairsError(std::size_t wanted, std::size_t available);
  std::size_t shortfall() const noexcept { return shortfall_; }

 private:
  std::size_t shortfall_;
};

/// Top-k abstracts by admissible delta (delta desc, abstract id asc).
std::vector<ItemPair> selectTopPairs(const std::vector<Candidate>& candidates, const SelectConfig& config = {});

struct SelectionSummary {
  std::size_t pairs = 0;
  double meanHighScore = 0;
  double meanLowScore = 0;
  double meanHighWords = 0;
  double meanLowWords = 0;

  /// e.g. "average LHF-Score (high): 7.2 (average length: 105 words); average LHF-Score (low): 1.7 (...)".
  std::string render() const;
};

SelectionSummary summarize(const std::vector<ItemPair>& pairs);

void writePairManifest(std::ostream& out, const std::vector<ItemPair>& pairs);
std::vector<ItemPair> readPairManifest(std::istream& in);

}  // namespace lexdrift
