#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lexdrift/corpus.hpp"
#include "lexdrift/divergence.hpp"

namespace lexdrift {

/// Per-key LHF weights: increase_pct / 1000. Keys outside the map weigh 0.
struct ScoreTable {
  std::map<LemmaKey, double> weights;
  std::string sourceReportId;
  std::string fingerprint;
  std::vector<std::string> warnings;

  double weight(const LemmaKey& key) const noexcept;
};

struct TableConfig {
  bool onlySignificant = true;
  bool onlyPositive = true;
};

ScoreTable buildScoreTable(const DivergenceReport& report, const TableConfig& config = {});

double scoreToken(const ScoreTable& table, const LemmaKey& key) noexcept;

struct TokenScore {
  LemmaKey key;
  double score = 0;
};

struct SequenceScore {
  double total = 0;
  std::vector<TokenScore> perToken;
};

SequenceScore scoreSequence(const ScoreTable& table, std::span<const TaggedToken> tokens);

/// `lemma,upos,weight`, weights rounded to 4 decimals.
void writeScoreTableCsv(std::ostream& out, const ScoreTable& table);
ScoreTable readScoreTableCsv(std::istream& in);

}  // namespace lexdrift
