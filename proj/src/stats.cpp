#include "lexdrift/stats.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "lexdrift/error.hpp"
#include "lexdrift/text.hpp"

namespace lexdrift {
namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

// Lower regularized gamma by its power series; converges fast for x < a + 1.
double gammaPSeries(double a, double x) {
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized gamma by its continued fraction (modified Lentz), for x >= a + 1.
double gammaQContinuedFraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularizedGammaQ(double a, double x) {
  if (!(a > 0) || !(x >= 0) || std::isnan(x)) throw DomainError("regularizedGammaQ: need a > 0 and x >= 0");
  if (x == 0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gammaPSeries(a, x);
  return gammaQContinuedFraction(a, x);
}

double chi2Sf(double x, double df) {
  if (!(df >= 1) || !(x >= 0)) throw DomainError("chi2Sf: need x >= 0 and df >= 1");
  return regularizedGammaQ(df / 2.0, x / 2.0);
}

double normalSf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

TestResult chi2Gof(std::uint64_t successes, std::uint64_t n, double p0) {
  if (n == 0 || successes > n) throw DomainError("chi2Gof: need 0 <= x <= n and n > 0");
  if (!(p0 > 0 && p0 < 1)) throw DomainError("chi2Gof: p0 must lie in (0, 1)");
  const double e1 = static_cast<double>(n) * p0;
  const double e2 = static_cast<double>(n) * (1 - p0);
  const double o1 = static_cast<double>(successes);
  const double o2 = static_cast<double>(n - successes);
  TestResult r;
  r.statistic = (o1 - e1) * (o1 - e1) / e1 + (o2 - e2) * (o2 - e2) / e2;
  r.df = 1;
  r.p = chi2Sf(r.statistic, 1);
  return r;
}

Descriptives itemDescriptives(const std::vector<Rating>& ratings) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> perItem;  // id -> (n, high)
  Descriptives d;
  for (const auto& r : ratings) {
    if (r.choice != ChoiceVariant::Low && r.choice != ChoiceVariant::High) {
      throw ValidationError("item descriptives need low/high ratings; item '" + r.itemId + "' has '" +
                            std::string(toString(r.choice)) + "'");
    }
    auto& [n, high] = perItem[r.itemId];
    ++n;
    const bool h = r.choice == ChoiceVariant::High;
    high += h;
    ++d.nRatings;
    d.nHigh += h;
  }
  for (const auto& [id, c] : perItem) {
    d.items.push_back({id, c.first, static_cast<double>(c.second) / static_cast<double>(c.first)});
  }
  if (d.nRatings) d.pooled = static_cast<double>(d.nHigh) / static_cast<double>(d.nRatings);
  return d;
}

SubgroupResult subgroupDescriptives(const std::vector<Rating>& ratings, const std::vector<ItemPair>& pairs,
                                    const LemmaKey& marker) {
  std::map<std::string, bool> marked;
  for (const auto& p : pairs) {
    if (p.high.tokens.empty()) {
      throw ValidationError("item '" + p.abstractId + "' has no tokens for its high variant");
    }
    bool has = false;
    for (const auto& t : p.high.tokens) has = has || keyOf(t) == marker;
    marked[p.abstractId] = has;
  }
  SubgroupResult out;
  out.marker = marker;
  for (const auto& [id, has] : marked) {
    if (has) out.itemsWith.push_back(id);
  }
  std::size_t highWith = 0, highWithout = 0;
  for (const auto& r : ratings) {
    auto it = marked.find(r.itemId);
    if (it == marked.end()) throw ValidationError("rating refers to unknown item '" + r.itemId + "'");
    if (r.choice != ChoiceVariant::Low && r.choice != ChoiceVariant::High) {
      throw ValidationError("subgroup descriptives need low/high ratings");
    }
    const bool h = r.choice == ChoiceVariant::High;
    if (it->second) {
      ++out.nWith;
      highWith += h;
    } else {
      ++out.nWithout;
      highWithout += h;
    }
  }
  if (out.nWith) {
    out.meanWith = static_cast<double>(highWith) / static_cast<double>(out.nWith);
  } else {
    out.flags.push_back("no ratings for items containing " + marker.canonical());
  }
  if (out.nWithout) {
    out.meanWithout = static_cast<double>(highWithout) / static_cast<double>(out.nWithout);
  } else {
    out.flags.push_back("no ratings for items without " + marker.canonical());
  }
  return out;
}

std::string formatP(double p) {
  if (p < 0.001) return "p < 0.001";
  if (p < 0.01) return "p < 0.01";
  if (p < 0.05) return "p < 0.05";
  return "p = " + text::fixed(p, 3);
}

std::string formatPct(double proportion) { return text::fixed(proportion * 100.0, 1) + "%"; }

}  // namespace lexdrift
