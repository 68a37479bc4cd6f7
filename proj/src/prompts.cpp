#include "lexdrift/prompts.hpp"

#include <algorithm>

#include "lexdrift/error.hpp"

namespace lexdrift {

PromptTemplate::PromptTemplate(std::string id, std::string text) : id_(std::move(id)), text_(std::move(text)) {
  for (std::size_t pos = 0; (pos = text_.find('{', pos)) != std::string::npos;) {
    const auto end = text_.find('}', pos);
    if (end == std::string::npos) throw ConfigError("template '" + id_ + "': unclosed placeholder");
    auto name = text_.substr(pos + 1, end - pos - 1);
    if (std::find(placeholders_.begin(), placeholders_.end(), name) == placeholders_.end()) {
      placeholders_.push_back(std::move(name));
    }
    pos = end + 1;
  }
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  for (const auto& p : placeholders_) {
    if (!values.count(p)) throw ValidationError("template '" + id_ + "': placeholder {" + p + "} is unfilled");
  }
  for (const auto& [k, v] : values) {
    if (std::find(placeholders_.begin(), placeholders_.end(), k) == placeholders_.end()) {
      throw ValidationError("template '" + id_ + "' has no placeholder {" + k + "}");
    }
  }
  // Single left-to-right pass so substituted text is never rescanned.
  std::string out;
  std::size_t pos = 0;
  while (pos < text_.size()) {
    const auto open = text_.find('{', pos);
    if (open == std::string::npos) {
      out.append(text_, pos, std::string::npos);
      break;
    }
    out.append(text_, pos, open - pos);
    const auto close = text_.find('}', open);
    out += values.at(text_.substr(open + 1, close - open - 1));
    pos = close + 1;
  }
  return out;
}

namespace prompts {

const PromptTemplate& continuation() {
  static const PromptTemplate t("continuation", "Continue the following academic article: \"{first_half}");
  return t;
}

const PromptTemplate& continuationClean() {
  static const PromptTemplate t(
      "continuation-clean",
      "The following text is meant to be a continuation of a scientific abstract. In some of the continuations, "
      "however, the AI finishes the abstract and continues with commentary. Please detect potential switches, and "
      "remove any commentary:\n\n\"{input_text}\"\n\n Output only the cleaned abstract. If the entire text is "
      "commentary, output an empty string.");
  return t;
}

const PromptTemplate& keywordSummary() {
  static const PromptTemplate t("keyword-summary",
                                "The following text is an abstract from a scientific paper:\n\n{input_text}\n\n"
                                "Summarize the abstract in keywords, separate keywords by commas.");
  return t;
}

const PromptTemplate& variant() {
  static const PromptTemplate t("variant",
                                "Based on the following keywords, write a 100-word abstract for a scientific journal "
                                "article: \"{line_of_keywords}.\" Reply with the abstract only.");
  return t;
}

const PromptTemplate& variantClean() {
  static const PromptTemplate t(
      "variant-clean",
      "The following text contains a scientific abstract, but sometimes further text:\n\n\"{input_text}\"\n\n"
      "Please remove any irrelevant text, which can include titles, incomplete sentences, even a comment that an "
      "abstract is to follow (\"Abstract: \"). Output only the cleaned abstract.");
  return t;
}

const std::vector<const PromptTemplate*>& all() {
  static const std::vector<const PromptTemplate*> v = {&continuation(), &continuationClean(), &keywordSummary(),
                                                       &variant(), &variantClean()};
  return v;
}

}  // namespace prompts
}  // namespace lexdrift
