#include "lexdrift/scoring.hpp"

#include <cmath>

#include "lexdrift/error.hpp"
#include "lexdrift/text.hpp"

namespace lexdrift {

double ScoreTable::weight(const LemmaKey& key) const noexcept {
  auto it = weights.find(key);
  return it == weights.end() ? 0.0 : it->second;
}

ScoreTable buildScoreTable(const DivergenceReport& report, const TableConfig& config) {
  ScoreTable table;
  table.sourceReportId = report.id;
  table.fingerprint = std::string("only_significant=") + (config.onlySignificant ? "1" : "0") +
                      ";only_positive=" + (config.onlyPositive ? "1" : "0") + ";alpha=" + text::shortest(report.alpha);
  for (const auto& row : report.rows) {
    if (config.onlySignificant && !row.significant) continue;
    if (config.onlyPositive && !(row.increasePct > 0)) continue;
    table.weights.emplace(row.key, row.increasePct / 1000.0);
  }
  if (table.weights.empty()) table.warnings.push_back("score table is empty: no key passed the filters");
  return table;
}

double scoreToken(const ScoreTable& table, const LemmaKey& key) noexcept { return table.weight(key); }

SequenceScore scoreSequence(const ScoreTable& table, std::span<const TaggedToken> tokens) {
  SequenceScore out;
  out.perToken.reserve(tokens.size());
  // Neumaier summation keeps the total independent of token order to ~1 ulp.
  double sum = 0, comp = 0;
  for (const auto& tok : tokens) {
    auto key = keyOf(tok);
    const double w = scoreToken(table, key);
    const double t = sum + w;
    comp += std::fabs(sum) >= std::fabs(w) ? (sum - t) + w : (w - t) + sum;
    sum = t;
    out.perToken.push_back({std::move(key), w});
  }
  out.total = sum + comp;
  return out;
}

void writeScoreTableCsv(std::ostream& out, const ScoreTable& table) {
  out << "lemma,upos,weight\n";
  for (const auto& [key, w] : table.weights) {
    out << text::csvField(key.lemma) << ',' << toString(key.upos) << ',' << text::fixed(w, 4) << '\n';
  }
}

ScoreTable readScoreTableCsv(std::istream& in) {
  const auto csv = text::readCsv(in);
  const auto cLemma = csv.column("lemma"), cUpos = csv.column("upos"), cWeight = csv.column("weight");
  ScoreTable table;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& f = csv.rows[i];
    auto upos = parseUpos(f[cUpos]);
    if (!upos) throw ParseError(i + 2, "unknown upos '" + f[cUpos] + "'");
    double w = 0;
    try {
      w = std::stod(f[cWeight]);
    } catch (const std::logic_error&) {
      throw ParseError(i + 2, "bad weight '" + f[cWeight] + "'");
    }
    if (!table.weights.emplace(LemmaKey{f[cLemma], *upos}, w).second) {
      throw ValidationError("duplicate key in score table: " + f[cLemma] + "_" + f[cUpos]);
    }
  }
  if (table.weights.empty()) table.warnings.push_back("score table is empty");
  return table;
}

}  // namespace lexdrift
