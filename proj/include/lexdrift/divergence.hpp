#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lexdrift/corpus.hpp"

namespace lexdrift {

/// Occurrences per million tokens. Throws DomainError for N = 0 or count > N.
double opm(std::uint64_t count, std::uint64_t total);

struct Chi2Result {
  double statistic = 0;
  double p = 1;
};

/// Pearson chi-square on [[a, b], [c, d]], df = 1. Throws DomainError on a zero marginal.
Chi2Result chi2TwoByTwo(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d, bool yates = false);

struct DivergenceRow {
  LemmaKey key;
  std::uint64_t countA = 0;
  std::uint64_t countB = 0;
  double opmA = 0;
  double opmB = 0;
  double increasePct = 0;
  double chi2 = 0;
  double p = 1;
  bool significant = false;
  std::set<std::string> forms;  // surface forms seen in either corpus

  bool increased() const noexcept { return significant && increasePct > 0; }
};

/// Keys whose baseline count is below the threshold, so no increase can be computed.
struct NovelRow {
  LemmaKey key;
  std::uint64_t countA = 0;
  std::uint64_t countB = 0;
  double opmB = 0;
};

struct DivergenceReport {
  std::string id;
  std::vector<DivergenceRow> rows;  // increase_pct desc, canonical key asc
  std::vector<NovelRow> novel;      // canonical key asc
  std::uint64_t totalA = 0;
  std::uint64_t totalB = 0;
  double alpha = 0.05;
};

struct CompareConfig {
  std::uint64_t minCountA = 1;
  double alpha = 0.05;
  bool yates = false;
};

DivergenceReport compare(const FrequencyTable& a, const FrequencyTable& b, const CompareConfig& config = {});

/// Strict total order used for report rows.
bool rowBefore(const DivergenceRow& x, const DivergenceRow& y);

struct OverlapMatch {
  std::string reference;
  LemmaKey key;
};

struct OverlapResult {
  std::vector<OverlapMatch> matched;
  std::size_t matchedCount = 0;
  std::size_t referenceCount = 0;
};

/// A reference surface form matches a significantly increased row by lemma or by a recorded form.
OverlapResult overlapWithReference(const DivergenceReport& report, const std::vector<std::string>& referenceForms);

struct CrossOverlap {
  std::size_t both = 0;
  std::size_t onlyAb = 0;
};

/// Among keys significantly increased in `ab`, how many are also significantly increased in `ac`.
CrossOverlap crossOverlap(const DivergenceReport& ab, const DivergenceReport& ac);

void writeReportCsv(std::ostream& out, const DivergenceReport& report);
void writeNovelCsv(std::ostream& out, const DivergenceReport& report);
/// Reads the report CSV back. Totals and forms are not part of the CSV and stay empty.
DivergenceReport readReportCsv(std::istream& in, double alpha = 0.05);

}  // namespace lexdrift
