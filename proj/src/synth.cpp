#include "lexdrift/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "lexdrift/error.hpp"
#include "lexdrift/random.hpp"
#include "lexdrift/text.hpp"

namespace lexdrift::synth {
namespace {

struct Entry {
  const char* lemma;
  double weight;
  bool overused;
};

// Weights are rough relative frequencies; overused entries get multiplied by the boost.
const std::vector<Entry> kDet = {{"the", 40, false}, {"a", 18, false}, {"this", 8, false}, {"these", 4, false},
                                 {"each", 2, false}, {"our", 3, false}};
const std::vector<Entry> kAdp = {{"of", 30, false}, {"in", 22, false}, {"for", 12, false}, {"with", 10, false},
                                 {"across", 2, false}, {"between", 3, false}, {"on", 8, false}};
const std::vector<Entry> kAdj = {
    {"new", 10, false},        {"large", 6, false},       {"small", 5, false},      {"clinical", 4, false},
    {"statistical", 4, false}, {"early", 4, false},       {"recent", 5, false},     {"simple", 4, false},
    {"previous", 3, false},    {"effective", 3, false},   {"local", 3, false},      {"spatial", 2, false},
    {"nuanced", 0.05, true},   {"multifaceted", 0, true}, {"robust", 0.6, true},    {"comprehensive", 0.8, true},
    {"seamless", 0.05, true},  {"crucial", 0.1, true}};
const std::vector<Entry> kNoun = {
    {"study", 12, false},    {"model", 10, false},    {"data", 10, false},      {"method", 8, false},
    {"result", 8, false},    {"patient", 5, false},   {"sample", 5, false},     {"effect", 6, false},
    {"analysis", 6, false},  {"network", 4, false},   {"protein", 3, false},    {"cell", 4, false},
    {"system", 5, false},    {"measurement", 3, false}, {"rate", 4, false},     {"group", 4, false},
    {"landscape", 0.1, true}, {"insight", 0.3, true}, {"framework", 1.5, true}, {"interplay", 0.02, true}};
const std::vector<Entry> kVerb = {
    {"show", 10, false},     {"use", 10, false},     {"measure", 5, false},   {"report", 5, false},
    {"find", 6, false},      {"increase", 4, false}, {"reduce", 4, false},    {"compare", 4, false},
    {"observe", 4, false},   {"estimate", 3, false}, {"test", 3, false},      {"describe", 3, false},
    {"foster", 0.05, true},  {"leverage", 0.1, true}, {"enhance", 0.5, true}, {"navigate", 0.05, true},
    {"highlight", 0.4, true}};
const std::vector<Entry> kAdv = {{"also", 6, false},        {"significantly", 2, false}, {"here", 3, false},
                                 {"further", 2, false},     {"seamlessly", 0.01, true}};
const std::vector<Entry> kCconj = {{"and", 1, false}};

struct Slot {
  Upos upos;
  const std::vector<Entry>* entries;
};

using Pattern = std::vector<Slot>;

const std::vector<Pattern>& patterns() {
  static const std::vector<Pattern> p = {
      {{Upos::DET, &kDet}, {Upos::ADJ, &kAdj}, {Upos::NOUN, &kNoun}, {Upos::VERB, &kVerb}, {Upos::DET, &kDet},
       {Upos::NOUN, &kNoun}, {Upos::ADP, &kAdp}, {Upos::DET, &kDet}, {Upos::NOUN, &kNoun}},
      {{Upos::DET, &kDet}, {Upos::NOUN, &kNoun}, {Upos::ADV, &kAdv}, {Upos::VERB, &kVerb}, {Upos::DET, &kDet},
       {Upos::ADJ, &kAdj}, {Upos::NOUN, &kNoun}},
      {{Upos::ADP, &kAdp}, {Upos::DET, &kDet}, {Upos::NOUN, &kNoun}, {Upos::PRON, nullptr}, {Upos::VERB, &kVerb},
       {Upos::DET, &kDet}, {Upos::ADJ, &kAdj}, {Upos::NOUN, &kNoun}, {Upos::CCONJ, &kCconj}, {Upos::DET, &kDet},
       {Upos::NOUN, &kNoun}},
      {{Upos::DET, &kDet}, {Upos::NOUN, &kNoun}, {Upos::ADP, &kAdp}, {Upos::ADJ, &kAdj}, {Upos::NOUN, &kNoun},
       {Upos::VERB, &kVerb}, {Upos::DET, &kDet}, {Upos::NOUN, &kNoun}},
  };
  return p;
}

class Generator {
 public:
  Generator(double boost, std::uint64_t seed) : rng_(seed), boost_(boost) {}

  void setBoost(double boost) {
    boost_ = boost;
    cache_.clear();
  }

  /// One sentence; the final token is a period.
  std::vector<TaggedToken> sentence() {
    const auto& pats = patterns();
    const auto& pat = pats[rnd::below(rng_, pats.size())];
    std::vector<TaggedToken> out;
    for (const auto& slot : pat) {
      if (slot.entries == nullptr) {
        out.push_back({"we", "we", Upos::PRON});
        continue;
      }
      const Entry& e = pick(*slot.entries);
      out.push_back({inflect(e.lemma, slot.upos), e.lemma, slot.upos});
    }
    out.front().form[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out.front().form[0])));
    out.push_back({".", ".", Upos::PUNCT});
    return out;
  }

  rnd::Engine& rng() { return rng_; }

 private:
  const Entry& pick(const std::vector<Entry>& entries) {
    auto& cum = cache_[&entries];
    if (cum.empty()) {
      double acc = 0;
      for (const auto& e : entries) {
        acc += e.overused ? e.weight * boost_ + (boost_ > 1 ? 0.02 * boost_ : 0.0) : e.weight;
        cum.push_back(acc);
      }
    }
    const double u = rnd::uniform(rng_) * cum.back();
    const auto idx = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    return entries[std::min(idx, entries.size() - 1)];
  }

  std::string inflect(const std::string& lemma, Upos upos) {
    if ((upos == Upos::NOUN || upos == Upos::VERB) && lemma != "data" && rnd::uniform(rng_) < 0.3) {
      if (lemma.back() == 's') return lemma + "es";
      if (lemma.back() == 'y') return lemma.substr(0, lemma.size() - 1) + "ies";
      return lemma + "s";
    }
    return lemma;
  }

  rnd::Engine rng_;
  double boost_;
  std::map<const void*, std::vector<double>> cache_;
};

std::string render(const std::vector<TaggedToken>& tokens) {
  std::string s;
  for (const auto& t : tokens) {
    if (!s.empty() && t.upos != Upos::PUNCT) s += ' ';
    s += t.form;
  }
  return s;
}

std::string padded(std::size_t n, int width) {
  auto s = std::to_string(n);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

}  // namespace

const std::vector<LemmaKey>& overusedKeys() {
  static const std::vector<LemmaKey> keys = [] {
    std::vector<LemmaKey> k;
    for (auto [list, upos] : {std::pair{&kAdj, Upos::ADJ}, std::pair{&kNoun, Upos::NOUN},
                              std::pair{&kVerb, Upos::VERB}, std::pair{&kAdv, Upos::ADV}}) {
      for (const auto& e : *list) {
        if (e.overused) k.push_back({e.lemma, upos});
      }
    }
    std::sort(k.begin(), k.end());
    return k;
  }();
  return keys;
}

Corpus makeCorpus(const CorpusSpec& spec) {
  if (spec.minTokens == 0 || spec.maxTokens < spec.minTokens) throw ConfigError("bad synthetic document length");
  Generator gen(spec.boost, spec.seed);
  Corpus c;
  c.corpusId = spec.idPrefix;
  const int width = static_cast<int>(std::to_string(spec.documents).size());
  for (std::size_t i = 0; i < spec.documents; ++i) {
    const auto target = spec.minTokens + rnd::below(gen.rng(), spec.maxTokens - spec.minTokens + 1);
    Document d;
    d.docId = spec.idPrefix + "-" + padded(i + 1, width);
    while (d.tokens.size() < target) {
      auto s = gen.sentence();
      d.tokens.insert(d.tokens.end(), s.begin(), s.end());
    }
    d.rawText = render(d.tokens);
    c.documents.push_back(std::move(d));
  }
  return c;
}

Corpus makeVariants(const VariantSpec& spec) {
  if (spec.minWords < 2 || spec.maxWords < spec.minWords) throw ConfigError("bad synthetic variant length");
  Generator gen(1.0, spec.seed);
  Corpus c;
  c.corpusId = "variants";
  const int aw = static_cast<int>(std::to_string(spec.abstracts).size());
  const int vw = static_cast<int>(std::to_string(spec.perAbstract).size());
  for (std::size_t a = 0; a < spec.abstracts; ++a) {
    const std::string abstractId = "abs-" + padded(a + 1, aw);
    for (std::size_t v = 0; v < spec.perAbstract; ++v) {
      gen.setBoost(1.0 + rnd::uniform(gen.rng()) * (spec.maxBoost - 1.0));
      const auto words = spec.minWords + rnd::below(gen.rng(), spec.maxWords - spec.minWords + 1);
      std::vector<TaggedToken> tokens;
      std::size_t count = 0;
      while (count < words) {
        for (auto& t : gen.sentence()) {
          if (t.upos == Upos::PUNCT) {
            tokens.push_back(std::move(t));
          } else if (count < words) {
            tokens.push_back(std::move(t));
            ++count;
          }
        }
      }
      if (tokens.back().upos != Upos::PUNCT) tokens.push_back({".", ".", Upos::PUNCT});
      Document d;
      d.docId = abstractId + "-v" + padded(v + 1, vw);
      d.abstractId = abstractId;
      d.variantId = d.docId;
      d.rawText = render(tokens);
      d.tokens = std::move(tokens);
      c.documents.push_back(std::move(d));
    }
  }
  return c;
}

std::vector<Rating> simulateRatings(const RatingSpec& spec) {
  const double u = std::sqrt(spec.sigma2User);
  const double halfWidth = std::sqrt(3.0 * spec.sigma2Item);
  if (spec.beta - u - halfWidth < 0 || spec.beta + u + halfWidth > 1) {
    throw ConfigError("rating simulation parameters leave the unit interval");
  }
  rnd::Engine rng(spec.seed);
  std::vector<double> userEffect(spec.users), itemEffect(spec.items);
  for (auto& e : userEffect) e = rnd::coin(rng) ? u : -u;
  for (auto& e : itemEffect) e = (2 * rnd::uniform(rng) - 1) * halfWidth;
  std::vector<Rating> out;
  out.reserve(spec.users * spec.items);
  for (std::size_t i = 0; i < spec.users; ++i) {
    for (std::size_t j = 0; j < spec.items; ++j) {
      const double p = spec.beta + userEffect[i] + itemEffect[j];
      const bool high = rnd::uniform(rng) < p;
      out.push_back({"u" + padded(i + 1, 3), "i" + padded(j + 1, 2), high ? ChoiceVariant::High : ChoiceVariant::Low,
                     1000.0});
    }
  }
  return out;
}

StudySimResult simulateStudy(const StudyConfig& config, const StudySimSpec& spec) {
  rnd::Engine rng(spec.seed);
  std::int64_t now = spec.startMs;
  std::ostringstream logStream;
  EventLog log(logStream);
  StudyService service(config, &log, [&now] { return now; });

  const double u = std::sqrt(spec.sigma2User);
  const double halfWidth = std::sqrt(3.0 * spec.sigma2Item);
  std::map<std::string, double> itemEffect;
  for (const auto& p : config.pairs) itemEffect[p.abstractId] = (2 * rnd::uniform(rng) - 1) * halfWidth;

  const int width = std::max<int>(3, static_cast<int>(std::to_string(spec.participants).size()));
  for (std::size_t i = 0; i < spec.participants; ++i) {
    const std::string pid = "p" + padded(i + 1, width);
    const double userEffect = rnd::coin(rng) ? u : -u;
    const double r = rnd::uniform(rng);
    enum class Kind { Normal, Incomplete, GotchaFail, Speeder } kind = Kind::Normal;
    if (r < spec.incompleteRate) {
      kind = Kind::Incomplete;
    } else if (r < spec.incompleteRate + spec.gotchaFailRate) {
      kind = Kind::GotchaFail;
    } else if (r < spec.incompleteRate + spec.gotchaFailRate + spec.speederRate) {
      kind = Kind::Speeder;
    }
    const auto session = service.createSession(pid);
    const std::size_t stopAfter =
        kind == Kind::Incomplete ? 3 + rnd::below(rng, 7) : session.plan.size();

    for (std::size_t k = 0; k < stopAfter; ++k) {
      const auto view = service.nextTrial(session.sessionId);
      if (!view) break;
      const auto& t = session.plan[static_cast<std::size_t>(view->trialIndex - 1)];
      ChoiceSide side;
      switch (t.itemType) {
        case ItemType::Critical: {
          const double p = std::clamp(spec.beta + userEffect + itemEffect[t.itemId], 0.0, 1.0);
          const bool high = rnd::uniform(rng) < p;
          // High is displayed on the left exactly when the trial is flipped.
          side = (high == t.flipped) ? ChoiceSide::Left : ChoiceSide::Right;
          break;
        }
        case ItemType::Gotcha: {
          const auto g = std::find_if(config.gotchas.begin(), config.gotchas.end(),
                                      [&](const GotchaItem& x) { return x.itemId == t.itemId; });
          const ChoiceSide instructed = g->instructedSide;
          const ChoiceSide other = instructed == ChoiceSide::Left ? ChoiceSide::Right : ChoiceSide::Left;
          side = kind == Kind::GotchaFail ? other : instructed;
          break;
        }
        default: {
          const bool good = rnd::uniform(rng) < spec.controlAccuracy;
          side = (good != t.flipped) ? ChoiceSide::Left : ChoiceSide::Right;
          break;
        }
      }
      const auto chars = std::max(text::utf8Length(view->leftText), text::utf8Length(view->rightText));
      const double reading = 225.0 + 25.0 * static_cast<double>(chars);
      double factor = 0.6 + rnd::uniform(rng);
      if (kind == Kind::Speeder) {
        factor = 0.1 + 0.2 * rnd::uniform(rng);
      } else if (t.itemType == ItemType::Critical && rnd::uniform(rng) < spec.fastRatingRate) {
        factor = 0.3;
      }
      const double rt = std::round(reading * factor);
      now += static_cast<std::int64_t>(rt) + 400;
      service.recordResponse(session.sessionId, view->trialIndex, side, rt);
    }
    now += 60'000;
  }
  return {service.exportRecords(), logStream.str()};
}

}  // namespace lexdrift::synth
