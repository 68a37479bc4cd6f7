#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lexdrift {

/// Universal POS inventory. The set is closed: anything else is rejected at ingestion.
enum class Upos : std::uint8_t {
  ADJ, ADP, ADV, AUX, CCONJ, DET, INTJ, NOUN, NUM, PART, PRON, PROPN, PUNCT, SCONJ, SYM, VERB, X
};

std::string_view toString(Upos upos) noexcept;
std::optional<Upos> parseUpos(std::string_view tag) noexcept;

struct TaggedToken {
  std::string form;
  std::string lemma;  // lower-cased at ingestion
  Upos upos = Upos::X;
};

/// lemma+POS unit of analysis, rendered `lemma_UPOS` (e.g. `nuanced_ADJ`).
struct LemmaKey {
  std::string lemma;
  Upos upos = Upos::X;

  std::string canonical() const;

  /// Parses `lemma_UPOS`; the split happens at the last underscore.
  static LemmaKey parse(std::string_view canonical);

  friend bool operator==(const LemmaKey&, const LemmaKey&) = default;
  /// Orders by canonical rendering.
  friend std::strong_ordering operator<=>(const LemmaKey& a, const LemmaKey& b);
};

inline LemmaKey keyOf(const TaggedToken& t) { return {t.lemma, t.upos}; }

struct Document {
  std::string docId;
  std::vector<TaggedToken> tokens;
  std::optional<std::string> rawText;
  // Optional grouping metadata carried by generated-variant records.
  std::optional<std::string> abstractId;
  std::optional<std::string> variantId;
};

struct Corpus {
  std::string corpusId;
  std::vector<Document> documents;

  std::uint64_t totalTokens() const noexcept;
};

struct FrequencyTable {
  std::string corpusId;
  std::map<LemmaKey, std::uint64_t> counts;
  std::uint64_t total = 0;  // N
  /// Surface forms observed per key (lower-cased), for matching inflected reference lists.
  std::map<LemmaKey, std::set<std::string>> forms;

  std::uint64_t count(const LemmaKey& key) const noexcept;
};

struct CountOptions {
  /// When false, PUNCT and SYM tokens are dropped from both the keys and N.
  bool includePunctuation = true;
};

// Readers. Both validate doc_id uniqueness and lower-case lemmas (falling back to the form).
Corpus parseTaggedRecords(std::istream& in, std::string corpusId = {});
Corpus parseConlluSubset(std::istream& in, std::string corpusId = {});

void writeTaggedRecords(std::ostream& out, const Corpus& corpus);
std::string toRecordLine(const Document& doc);

std::size_t wordCount(std::string_view text);

/// First floor(n/2) words and the rest, each re-joined with single spaces.
std::pair<std::string, std::string> splitForContinuation(std::string_view text);

/// Word count of a document: raw text when present, otherwise its token count.
std::size_t documentWords(const Document& doc);

std::vector<Document> filterMinWords(std::vector<Document> documents, std::size_t minWords = 40);

FrequencyTable countLemmas(const Corpus& corpus, const CountOptions& options = {});

/// Key-wise sum; N adds. Used to merge counts computed over disjoint shards.
FrequencyTable merge(const FrequencyTable& a, const FrequencyTable& b);

}  // namespace lexdrift

template <>
struct std::hash<lexdrift::LemmaKey> {
  std::size_t operator()(const lexdrift::LemmaKey& k) const noexcept {
    return std::hash<std::string>{}(k.lemma) * 31u + static_cast<std::size_t>(k.upos);
  }
};
