#include "lexdrift/divergence.hpp"

#include <algorithm>
#include <cmath>

#include "lexdrift/error.hpp"
#include "lexdrift/stats.hpp"
#include "lexdrift/text.hpp"

namespace lexdrift {

double opm(std::uint64_t count, std::uint64_t total) {
  if (total == 0) throw DomainError("opm: N must be positive");
  if (count > total) throw DomainError("opm: count exceeds N");
  return static_cast<double>(count) / static_cast<double>(total) * 1e6;
}

Chi2Result chi2TwoByTwo(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d, bool yates) {
  const long double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
  if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) {
    throw DomainError("chi-square undefined: 2x2 table has a zero marginal");
  }
  const long double n = r1 + r2;
  long double diff = std::fabs(static_cast<long double>(a) * d - static_cast<long double>(b) * c);
  if (yates) diff = std::max(0.0L, diff - n / 2);
  const auto stat = static_cast<double>(n * diff * diff / (r1 * r2 * c1 * c2));
  return {stat, chi2Sf(stat, 1)};
}

bool rowBefore(const DivergenceRow& x, const DivergenceRow& y) {
  if (x.increasePct != y.increasePct) return x.increasePct > y.increasePct;
  return x.key < y.key;
}

DivergenceReport compare(const FrequencyTable& a, const FrequencyTable& b, const CompareConfig& config) {
  if (a.total == 0 || b.total == 0) throw ValidationError("compare: both corpora need N > 0");
  if (a.counts.empty() || b.counts.empty()) throw ValidationError("compare: empty frequency table");
  if (config.minCountA < 1) throw ConfigError("compare: min_count_a must be at least 1");
  if (!(config.alpha > 0 && config.alpha < 1)) throw ConfigError("compare: alpha must lie in (0, 1)");

  DivergenceReport report;
  report.id = (a.corpusId.empty() ? "a" : a.corpusId) + "_vs_" + (b.corpusId.empty() ? "b" : b.corpusId);
  report.totalA = a.total;
  report.totalB = b.total;
  report.alpha = config.alpha;

  auto formsOf = [](const FrequencyTable& t, const LemmaKey& k) {
    auto it = t.forms.find(k);
    return it == t.forms.end() ? std::set<std::string>{} : it->second;
  };

  auto emit = [&](const LemmaKey& key, std::uint64_t ca, std::uint64_t cb) {
    if (ca < config.minCountA) {
      report.novel.push_back({key, ca, cb, opm(cb, b.total)});
      return;
    }
    DivergenceRow row;
    row.key = key;
    row.countA = ca;
    row.countB = cb;
    row.opmA = opm(ca, a.total);
    row.opmB = opm(cb, b.total);
    row.increasePct = (row.opmB - row.opmA) / row.opmA * 100.0;
    if (ca == a.total && cb == b.total) {
      row.chi2 = 0;  // every token is this key in both corpora
      row.p = 1;
    } else {
      const auto r = chi2TwoByTwo(ca, a.total - ca, cb, b.total - cb, config.yates);
      row.chi2 = r.statistic;
      row.p = r.p;
    }
    row.significant = row.p < config.alpha;
    row.forms = formsOf(a, key);
    const auto fb = formsOf(b, key);
    row.forms.insert(fb.begin(), fb.end());
    report.rows.push_back(std::move(row));
  };

  auto ia = a.counts.begin();
  auto ib = b.counts.begin();
  while (ia != a.counts.end() || ib != b.counts.end()) {
    if (ib == b.counts.end() || (ia != a.counts.end() && ia->first < ib->first)) {
      emit(ia->first, ia->second, 0);
      ++ia;
    } else if (ia == a.counts.end() || ib->first < ia->first) {
      emit(ib->first, 0, ib->second);
      ++ib;
    } else {
      emit(ia->first, ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  std::sort(report.rows.begin(), report.rows.end(), rowBefore);
  return report;
}

OverlapResult overlapWithReference(const DivergenceReport& report, const std::vector<std::string>& referenceForms) {
  OverlapResult result;
  for (const auto& raw : referenceForms) {
    const auto ref = text::toLower(text::trim(raw));
    if (ref.empty()) continue;
    ++result.referenceCount;
    for (const auto& row : report.rows) {
      if (!row.increased()) continue;
      if (row.key.lemma == ref || row.forms.count(ref)) {
        result.matched.push_back({ref, row.key});
        break;
      }
    }
  }
  result.matchedCount = result.matched.size();
  return result;
}

CrossOverlap crossOverlap(const DivergenceReport& ab, const DivergenceReport& ac) {
  std::set<LemmaKey> inAc;
  for (const auto& row : ac.rows) {
    if (row.increased()) inAc.insert(row.key);
  }
  CrossOverlap out;
  for (const auto& row : ab.rows) {
    if (!row.increased()) continue;
    if (inAc.count(row.key)) {
      ++out.both;
    } else {
      ++out.onlyAb;
    }
  }
  return out;
}

void writeReportCsv(std::ostream& out, const DivergenceReport& report) {
  out << "lemma,upos,count_a,count_b,opm_a,opm_b,increase_pct,chi2,p,significant\n";
  for (const auto& r : report.rows) {
    out << text::csvField(r.key.lemma) << ',' << toString(r.key.upos) << ',' << r.countA << ',' << r.countB << ','
        << text::fixed(r.opmA, 6) << ',' << text::fixed(r.opmB, 6) << ',' << text::fixed(r.increasePct, 6) << ','
        << text::shortest(r.chi2) << ',' << text::shortest(r.p) << ',' << (r.significant ? "true" : "false")
        << '\n';
  }
}

void writeNovelCsv(std::ostream& out, const DivergenceReport& report) {
  out << "lemma,upos,count_b,opm_b\n";
  for (const auto& r : report.novel) {
    out << text::csvField(r.key.lemma) << ',' << toString(r.key.upos) << ',' << r.countB << ','
        << text::fixed(r.opmB, 6) << '\n';
  }
}

DivergenceReport readReportCsv(std::istream& in, double alpha) {
  const auto table = text::readCsv(in);
  const std::size_t cLemma = table.column("lemma"), cUpos = table.column("upos"), cA = table.column("count_a"),
                    cB = table.column("count_b"), cOa = table.column("opm_a"), cOb = table.column("opm_b"),
                    cInc = table.column("increase_pct"), cChi = table.column("chi2"), cP = table.column("p"),
                    cSig = table.column("significant");
  DivergenceReport report;
  report.alpha = alpha;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& f = table.rows[i];
    try {
      DivergenceRow row;
      auto upos = parseUpos(f[cUpos]);
      if (!upos) throw ParseError(i + 2, "unknown upos '" + f[cUpos] + "'");
      row.key = {f[cLemma], *upos};
      row.countA = std::stoull(f[cA]);
      row.countB = std::stoull(f[cB]);
      row.opmA = std::stod(f[cOa]);
      row.opmB = std::stod(f[cOb]);
      row.increasePct = std::stod(f[cInc]);
      row.chi2 = std::stod(f[cChi]);
      row.p = std::stod(f[cP]);
      row.significant = f[cSig] == "true";
      report.rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw ParseError(i + 2, "bad numeric field in divergence report");
    }
  }
  return report;
}

}  // namespace lexdrift
