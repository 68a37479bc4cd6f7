#include "lexdrift/itemgen.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "lexdrift/text.hpp"

namespace lexdrift {
namespace {

bool variantBefore(const Variant& a, const Variant& b) {
  if (a.lhfScore != b.lhfScore) return a.lhfScore < b.lhfScore;
  return text::idLess(a.variantId, b.variantId);
}

std::size_t absDiff(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

std::string_view stripPunct(std::string_view w) {
  auto isWordChar = [](char c) {
    return static_cast<unsigned char>(c) >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
           (c >= 'A' && c <= 'Z') || c == '-' || c == '\'';
  };
  while (!w.empty() && !isWordChar(w.front())) w.remove_prefix(1);
  while (!w.empty() && !isWordChar(w.back())) w.remove_suffix(1);
  return w;
}

nlohmann::ordered_json variantJson(const Variant& v) {
  nlohmann::ordered_json j;
  j["variant_id"] = v.variantId;
  j["text"] = v.text;
  j["word_count"] = v.wordCount;
  j["lhf_score"] = v.lhfScore;
  auto toks = nlohmann::ordered_json::array();
  for (const auto& t : v.tokens) {
    toks.push_back({{"form", t.form}, {"lemma", t.lemma}, {"upos", std::string(toString(t.upos))}});
  }
  j["tokens"] = std::move(toks);
  return j;
}

Variant variantFromJson(const nlohmann::json& j, const std::string& abstractId, std::size_t lineNo) {
  Variant v;
  v.abstractId = abstractId;
  v.variantId = j.at("variant_id").is_string() ? j.at("variant_id").get<std::string>()
                                                : std::to_string(j.at("variant_id").get<long long>());
  v.text = j.at("text").get<std::string>();
  v.wordCount = j.at("word_count").get<std::size_t>();
  v.lhfScore = j.at("lhf_score").get<double>();
  if (j.contains("tokens")) {
    for (const auto& t : j["tokens"]) {
      auto upos = parseUpos(t.at("upos").get<std::string>());
      if (!upos) throw ParseError(lineNo, "unknown upos in pair manifest");
      v.tokens.push_back({t.at("form").get<std::string>(), t.value("lemma", std::string{}), *upos});
    }
  }
  return v;
}

}  // namespace

Variant makeVariant(const Document& doc, const ScoreTable& table) {
  Variant v;
  v.abstractId = doc.abstractId.value_or(doc.docId);
  v.variantId = doc.variantId.value_or(doc.docId);
  if (doc.rawText) {
    v.text = *doc.rawText;
  } else {
    for (const auto& t : doc.tokens) {
      if (!v.text.empty()) v.text += ' ';
      v.text += t.form;
    }
  }
  v.tokens = doc.tokens;
  v.wordCount = wordCount(v.text);
  v.lhfScore = scoreSequence(table, v.tokens).total;
  return v;
}

const std::vector<std::string>& defaultBannedWords() {
  static const std::vector<std::string> words = {
      "advancements", "aligns",     "boasts",     "commendable", "comprehending", "crucial",    "delve",
      "delved",       "delves",     "delving",    "emphasizing", "garnered",      "groundbreaking", "intricacies",
      "intricate",    "invaluable", "meticulous", "meticulously", "notable",      "noteworthy", "pivotal",
      "potential",    "realm",      "showcases",  "showcasing",  "significant",   "strategically", "surpasses",
      "surpassing",   "underscore", "underscores", "underscoring"};
  return words;
}

std::vector<Variant> filterVariants(std::vector<Variant> variants, const FilterConfig& config) {
  std::set<std::string> banned;
  for (const auto& w : config.banned) {
    auto t = text::toLower(text::trim(w));
    if (!t.empty()) banned.insert(std::move(t));
  }
  auto containsBanned = [&](const Variant& v) {
    if (banned.empty()) return false;
    if (!v.tokens.empty()) {
      return std::any_of(v.tokens.begin(), v.tokens.end(),
                         [&](const TaggedToken& t) { return banned.count(text::toLower(t.form)) > 0; });
    }
    for (auto w : text::splitWords(v.text)) {
      if (banned.count(text::toLower(stripPunct(w)))) return true;
    }
    return false;
  };
  std::erase_if(variants, [&](const Variant& v) {
    return v.wordCount < config.minWords || v.wordCount > config.maxWords || containsBanned(v);
  });
  return variants;
}

ItemPair makePair(const Variant& low, const Variant& high) {
  ItemPair p;
  p.abstractId = low.abstractId;
  p.low = low;
  p.high = high;
  p.delta = high.lhfScore - low.lhfScore;
  p.lengthDiff = absDiff(high.wordCount, low.wordCount);
  return p;
}

CandidateSet pairPerAbstract(const std::vector<Variant>& variants) {
  std::map<std::string, std::vector<Variant>> groups;
  for (const auto& v : variants) groups[v.abstractId].push_back(v);

  CandidateSet out;
  for (auto& [abstractId, group] : groups) {
    if (group.size() < 2) {
      out.warnings.push_back("abstract '" + abstractId + "' has fewer than 2 variants; skipped");
      continue;
    }
    std::sort(group.begin(), group.end(), variantBefore);
    for (std::size_t i = 1; i < group.size(); ++i) {
      if (group[i].variantId == group[i - 1].variantId) {
        throw ValidationError("duplicate variant_id '" + group[i].variantId + "' in abstract '" + abstractId + "'");
      }
    }
    // Max-score variant with the lowest id; never the low variant itself.
    const double top = group.back().lhfScore;
    std::size_t hi = 1;
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (group[i].lhfScore == top && i != 0) {
        hi = i;
        break;
      }
    }
    Candidate c;
    c.extreme = makePair(group.front(), group[hi]);
    c.variants = std::move(group);
    out.candidates.push_back(std::move(c));
  }
  return out;
}

std::optional<ItemPair> bestAdmissiblePair(const Candidate& candidate, std::size_t lengthTol) {
  const auto& vs = candidate.variants;
  const std::size_t n = vs.size();
  if (n < 2) return std::nullopt;

  bool found = false;
  std::size_t bestLow = 0, bestHigh = 0;
  double bestDelta = 0;
  auto better = [&](double d, std::size_t i, std::size_t j) {
    if (!found) return true;
    if (d != bestDelta) return d > bestDelta;
    if (vs[i].variantId != vs[bestLow].variantId) return text::idLess(vs[i].variantId, vs[bestLow].variantId);
    return text::idLess(vs[j].variantId, vs[bestHigh].variantId);
  };

  const double top = vs.back().lhfScore;
  for (std::size_t i = 0; i < n; ++i) {
    if (found && top - vs[i].lhfScore < bestDelta) break;
    for (std::size_t jj = n; jj-- > 0;) {
      if (jj == i) continue;
      const double d = vs[jj].lhfScore - vs[i].lhfScore;
      if (d < 0 || (found && d < bestDelta)) break;
      if (absDiff(vs[i].wordCount, vs[jj].wordCount) > lengthTol) continue;
      if (better(d, i, jj)) {
        found = true;
        bestDelta = d;
        bestLow = i;
        bestHigh = jj;
      }
    }
  }
  if (!found) return std::nullopt;
  return makePair(vs[bestLow], vs[bestHigh]);
}

InsufficientPairsError::InsufficientPairsError(std::size_t wanted, std::size_t available)
    : ValidationError("need " + std::to_string(wanted) + " length-admissible abstracts, found " +
                      std::to_string(available) + " (short by " + std::to_string(wanted - available) + ")"),
      shortfall_(wanted - available) {}

std::vector<ItemPair> selectTopPairs(const std::vector<Candidate>& candidates, const SelectConfig& config) {
  std::vector<ItemPair> admissible;
  for (const auto& c : candidates) {
    if (config.mode == RunnerUpMode::AbstractReplacement) {
      if (c.extreme.lengthDiff <= config.lengthTol) admissible.push_back(c.extreme);
    } else if (auto p = bestAdmissiblePair(c, config.lengthTol)) {
      admissible.push_back(std::move(*p));
    }
  }
  std::sort(admissible.begin(), admissible.end(), [](const ItemPair& a, const ItemPair& b) {
    if (a.delta != b.delta) return a.delta > b.delta;
    return text::idLess(a.abstractId, b.abstractId);
  });
  if (admissible.size() < config.k) throw InsufficientPairsError(config.k, admissible.size());
  admissible.resize(config.k);
  return admissible;
}

std::string SelectionSummary::render() const {
  return "average LHF-Score (high): " + text::fixed(meanHighScore, 1) +
         " (average length: " + text::fixed(meanHighWords, 0) + " words); average LHF-Score (low): " +
         text::fixed(meanLowScore, 1) + " (average length: " + text::fixed(meanLowWords, 0) + " words)";
}

SelectionSummary summarize(const std::vector<ItemPair>& pairs) {
  SelectionSummary s;
  s.pairs = pairs.size();
  if (pairs.empty()) return s;
  for (const auto& p : pairs) {
    s.meanHighScore += p.high.lhfScore;
    s.meanLowScore += p.low.lhfScore;
    s.meanHighWords += static_cast<double>(p.high.wordCount);
    s.meanLowWords += static_cast<double>(p.low.wordCount);
  }
  const auto n = static_cast<double>(pairs.size());
  s.meanHighScore /= n;
  s.meanLowScore /= n;
  s.meanHighWords /= n;
  s.meanLowWords /= n;
  return s;
}

void writePairManifest(std::ostream& out, const std::vector<ItemPair>& pairs) {
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["abstract_id"] = p.abstractId;
    j["low"] = variantJson(p.low);
    j["high"] = variantJson(p.high);
    j["delta"] = p.delta;
    out << j.dump() << '\n';
  }
}

std::vector<ItemPair> readPairManifest(std::istream& in) {
  std::vector<ItemPair> pairs;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("abstract_id").is_string() ? j.at("abstract_id").get<std::string>()
                                                        : std::to_string(j.at("abstract_id").get<long long>());
      auto p = makePair(variantFromJson(j.at("low"), id, lineNo), variantFromJson(j.at("high"), id, lineNo));
      pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineNo, std::string("bad pair record: ") + e.what());
    }
  }
  return pairs;
}

}  // namespace lexdrift
