#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lexdrift/corpus.hpp"
#include "lexdrift/itemgen.hpp"
#include "lexdrift/records.hpp"

namespace lexdrift {

/// Regularized upper incomplete gamma Q(a, x).
double regularizedGammaQ(double a, double x);

/// Chi-square upper tail, Q(df/2, x/2).
double chi2Sf(double x, double df);

/// Standard normal upper tail.
double normalSf(double z);

struct TestResult {
  double statistic = 0;
  int df = 1;
  double p = 1;
};

/// Two-cell goodness of fit of `successes` out of `n` against probability p0.
TestResult chi2Gof(std::uint64_t successes, std::uint64_t n, double p0 = 0.5);

struct ItemDescriptives {
  std::string itemId;
  std::size_t nRatings = 0;
  double meanHighPreference = 0;
};

struct Descriptives {
  std::vector<ItemDescriptives> items;  // item id order
  std::size_t nRatings = 0;
  std::size_t nHigh = 0;
  double pooled = 0;
};

/// Per-item share of ratings choosing the high-score variant. Ratings must be low/high.
Descriptives itemDescriptives(const std::vector<Rating>& ratings);

struct SubgroupResult {
  LemmaKey marker;
  std::optional<double> meanWith;
  std::optional<double> meanWithout;
  std::size_t nWith = 0;
  std::size_t nWithout = 0;
  std::vector<std::string> itemsWith;
  std::vector<std::string> flags;
};

/// Splits ratings by whether the item's high variant contains `marker`.
SubgroupResult subgroupDescriptives(const std::vector<Rating>& ratings, const std::vector<ItemPair>& pairs,
                                    const LemmaKey& marker);

/// "p < 0.001", "p < 0.01", "p < 0.05" or "p = 0.123".
std::string formatP(double p);
/// Percentage with one decimal, e.g. "52.4%".
std::string formatPct(double proportion);

}  // namespace lexdrift
