#include "lexdrift/corpus.hpp"

#include <algorithm>
#include <array>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "lexdrift/error.hpp"
#include "lexdrift/text.hpp"

namespace lexdrift {
namespace {

constexpr std::array<std::string_view, 17> kUposNames = {
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"};

TaggedToken makeToken(std::string form, std::string_view lemma, Upos upos) {
  TaggedToken t;
  t.lemma = lemma.empty() || lemma == "_" ? text::toLower(form) : text::toLower(lemma);
  t.form = std::move(form);
  t.upos = upos;
  return t;
}

void checkUnique(std::unordered_set<std::string>& seen, const std::string& id, std::size_t line) {
  if (!seen.insert(id).second) {
    throw ValidationError("duplicate doc_id '" + id + "' at line " + std::to_string(line));
  }
}

std::string stringField(const nlohmann::json& obj, const char* name, std::size_t line) {
  const auto& v = obj.at(name);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ParseError(line, std::string("field '") + name + "' must be a string");
}

bool isPunctuation(Upos u) noexcept { return u == Upos::PUNCT || u == Upos::SYM; }

}  // namespace

std::string_view toString(Upos upos) noexcept { return kUposNames[static_cast<std::size_t>(upos)]; }

std::optional<Upos> parseUpos(std::string_view tag) noexcept {
  for (std::size_t i = 0; i < kUposNames.size(); ++i) {
    if (kUposNames[i] == tag) return static_cast<Upos>(i);
  }
  return std::nullopt;
}

std::string LemmaKey::canonical() const {
  std::string out = lemma;
  out += '_';
  out += toString(upos);
  return out;
}

LemmaKey LemmaKey::parse(std::string_view canonical) {
  const auto pos = canonical.rfind('_');
  if (pos == std::string_view::npos || pos == 0) {
    throw ValidationError("not a lemma_UPOS key: '" + std::string(canonical) + "'");
  }
  auto upos = parseUpos(canonical.substr(pos + 1));
  if (!upos) throw ValidationError("unknown UPOS in key '" + std::string(canonical) + "'");
  return {std::string(canonical.substr(0, pos)), *upos};
}

std::strong_ordering operator<=>(const LemmaKey& a, const LemmaKey& b) {
  // Compares `a.lemma + '_' + tag(a)` against the same for b without allocating.
  auto at = [](const LemmaKey& k, std::size_t i) -> int {
    if (i < k.lemma.size()) return static_cast<unsigned char>(k.lemma[i]);
    if (i == k.lemma.size()) return '_';
    const auto tag = toString(k.upos);
    const std::size_t j = i - k.lemma.size() - 1;
    return j < tag.size() ? static_cast<unsigned char>(tag[j]) : -1;
  };
  const std::size_t la = a.lemma.size() + 1 + toString(a.upos).size();
  const std::size_t lb = b.lemma.size() + 1 + toString(b.upos).size();
  const std::size_t n = std::max(la, lb);
  for (std::size_t i = 0; i < n; ++i) {
    const int ca = at(a, i);
    const int cb = at(b, i);
    if (ca != cb) return ca < cb ? std::strong_ordering::less : std::strong_ordering::greater;
  }
  return std::strong_ordering::equal;
}

std::uint64_t Corpus::totalTokens() const noexcept {
  std::uint64_t n = 0;
  for (const auto& d : documents) n += d.tokens.size();
  return n;
}

std::uint64_t FrequencyTable::count(const LemmaKey& key) const noexcept {
  auto it = counts.find(key);
  return it == counts.end() ? 0 : it->second;
}

Corpus parseTaggedRecords(std::istream& in, std::string corpusId) {
  Corpus corpus;
  corpus.corpusId = std::move(corpusId);
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (text::trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineNo, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object() || !rec.contains("doc_id")) throw ParseError(lineNo, "record without doc_id");

    Document doc;
    doc.docId = stringField(rec, "doc_id", lineNo);
    if (rec.contains("text") && rec["text"].is_string()) doc.rawText = rec["text"].get<std::string>();
    if (rec.contains("abstract_id")) doc.abstractId = stringField(rec, "abstract_id", lineNo);
    if (rec.contains("variant_id")) doc.variantId = stringField(rec, "variant_id", lineNo);

    if (!rec.contains("tokens")) {
      if (!doc.rawText) throw ParseError(lineNo, "record has neither tokens nor text");
    } else {
      const auto& toks = rec["tokens"];
      if (!toks.is_array()) throw ParseError(lineNo, "tokens must be an array");
      if (toks.empty() && !doc.rawText) throw ParseError(lineNo, "empty token array");
      doc.tokens.reserve(toks.size());
      for (std::size_t i = 0; i < toks.size(); ++i) {
        const auto& t = toks[i];
        const std::string where = "token " + std::to_string(i) + ": ";
        if (!t.is_object()) throw ParseError(lineNo, where + "not an object");
        if (!t.contains("form") || !t["form"].is_string() || t["form"].get_ref<const std::string&>().empty()) {
          throw ParseError(lineNo, where + "missing form");
        }
        if (!t.contains("upos") || !t["upos"].is_string()) throw ParseError(lineNo, where + "missing upos");
        auto upos = parseUpos(t["upos"].get_ref<const std::string&>());
        if (!upos) throw ParseError(lineNo, where + "unknown upos '" + t["upos"].get<std::string>() + "'");
        std::string lemma;
        if (t.contains("lemma") && t["lemma"].is_string()) lemma = t["lemma"].get<std::string>();
        doc.tokens.push_back(makeToken(t["form"].get<std::string>(), lemma, *upos));
      }
    }
    checkUnique(seen, doc.docId, lineNo);
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

Corpus parseConlluSubset(std::istream& in, std::string corpusId) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  const bool byNewdoc = std::any_of(lines.begin(), lines.end(), [](const std::string& l) {
    return l.rfind("# newdoc", 0) == 0;
  });

  Corpus corpus;
  corpus.corpusId = std::move(corpusId);
  std::unordered_set<std::string> seen;
  Document cur;
  std::optional<std::string> pendingId;
  std::size_t docLine = 0;

  auto flush = [&](std::size_t lineNo) {
    if (cur.tokens.empty()) return;
    cur.docId = pendingId.value_or("doc" + std::to_string(corpus.documents.size() + 1));
    checkUnique(seen, cur.docId, docLine ? docLine : lineNo);
    corpus.documents.push_back(std::move(cur));
    cur = Document{};
    pendingId.reset();
    docLine = 0;
  };

  auto idFromComment = [](std::string_view comment) -> std::optional<std::string> {
    const auto eq = comment.find('=');
    if (eq == std::string_view::npos) return std::nullopt;
    auto v = text::trim(comment.substr(eq + 1));
    if (v.empty()) return std::nullopt;
    return std::string(v);
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineNo = i + 1;
    const std::string_view l = lines[i];
    if (text::trim(l).empty()) {
      if (!byNewdoc) flush(lineNo);
      continue;
    }
    if (l.front() == '#') {
      if (byNewdoc && l.rfind("# newdoc", 0) == 0) {
        flush(lineNo);
        pendingId = idFromComment(l);
        docLine = lineNo;
      } else if (!byNewdoc && l.rfind("# sent_id", 0) == 0 && cur.tokens.empty()) {
        pendingId = idFromComment(l);
        docLine = lineNo;
      }
      continue;
    }
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (cols.size() < 4) {
      const auto tab = l.find('\t', start);
      cols.push_back(l.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (cols.size() < 4) throw ParseError(lineNo, "token line needs at least 4 tab-separated columns");
    const auto id = cols[0];
    if (id.find('-') != std::string_view::npos || id.find('.') != std::string_view::npos) continue;
    if (cols[1].empty()) throw ParseError(lineNo, "empty FORM");
    auto upos = parseUpos(cols[3]);
    if (!upos) throw ParseError(lineNo, "unknown UPOS '" + std::string(cols[3]) + "'");
    if (!docLine) docLine = lineNo;
    cur.tokens.push_back(makeToken(std::string(cols[1]), cols[2], *upos));
  }
  flush(lines.size());
  return corpus;
}

std::string toRecordLine(const Document& doc) {
  nlohmann::json rec;
  rec["doc_id"] = doc.docId;
  if (doc.abstractId) rec["abstract_id"] = *doc.abstractId;
  if (doc.variantId) rec["variant_id"] = *doc.variantId;
  if (doc.rawText) rec["text"] = *doc.rawText;
  auto toks = nlohmann::json::array();
  for (const auto& t : doc.tokens) {
    toks.push_back({{"form", t.form}, {"lemma", t.lemma}, {"upos", std::string(toString(t.upos))}});
  }
  if (!toks.empty() || !doc.rawText) rec["tokens"] = std::move(toks);
  return rec.dump();
}

void writeTaggedRecords(std::ostream& out, const Corpus& corpus) {
  for (const auto& d : corpus.documents) out << toRecordLine(d) << '\n';
}

std::size_t wordCount(std::string_view s) { return text::splitWords(s).size(); }

std::pair<std::string, std::string> splitForContinuation(std::string_view s) {
  const auto words = text::splitWords(s);
  if (words.size() < 2) {
    throw ValidationError("cannot split text with " + std::to_string(words.size()) + " word(s)");
  }
  const std::size_t half = words.size() / 2;
  auto join = [&](std::size_t from, std::size_t to) {
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
      if (i > from) out += ' ';
      out += words[i];
    }
    return out;
  };
  return {join(0, half), join(half, words.size())};
}

std::size_t documentWords(const Document& doc) {
  return doc.rawText ? wordCount(*doc.rawText) : doc.tokens.size();
}

std::vector<Document> filterMinWords(std::vector<Document> documents, std::size_t minWords) {
  std::erase_if(documents, [&](const Document& d) { return documentWords(d) < minWords; });
  return documents;
}

FrequencyTable countLemmas(const Corpus& corpus, const CountOptions& options) {
  std::unordered_map<LemmaKey, std::uint64_t> counts;
  std::unordered_map<LemmaKey, std::set<std::string>> forms;
  FrequencyTable table;
  table.corpusId = corpus.corpusId;
  for (const auto& doc : corpus.documents) {
    if (doc.tokens.empty()) {
      throw ValidationError("document '" + doc.docId + "' is untagged; count_lemmas needs tagged input");
    }
    for (const auto& tok : doc.tokens) {
      if (!options.includePunctuation && isPunctuation(tok.upos)) continue;
      const auto key = keyOf(tok);
      ++counts[key];
      forms[key].insert(text::toLower(tok.form));
      ++table.total;
    }
  }
  for (auto& [k, c] : counts) table.counts.emplace(k, c);
  for (auto& [k, f] : forms) table.forms.emplace(k, std::move(f));
  return table;
}

FrequencyTable merge(const FrequencyTable& a, const FrequencyTable& b) {
  FrequencyTable out = a;
  out.total += b.total;
  for (const auto& [k, c] : b.counts) out.counts[k] += c;
  for (const auto& [k, f] : b.forms) out.forms[k].insert(f.begin(), f.end());
  return out;
}

}  // namespace lexdrift
