#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lexdrift {

/// Template text with `{name}` placeholders.
class PromptTemplate {
 public:
  PromptTemplate(std::string id, std::string text);

  const std::string& id() const noexcept { return id_; }
  const std::string& text() const noexcept { return text_; }
  const std::vector<std::string>& placeholders() const noexcept { return placeholders_; }

  /// Throws ValidationError if a placeholder has no value or a value names no placeholder.
  std::string render(const std::map<std::string, std::string>& values) const;

 private:
  std::string id_;
  std::string text_;
  std::vector<std::string> placeholders_;
};

namespace prompts {

inline constexpr std::string_view kTemplateVersion = "1";

const PromptTemplate& continuation();       // {first_half}
const PromptTemplate& continuationClean();  // {input_text}
const PromptTemplate& keywordSummary();     // {input_text}
const PromptTemplate& variant();            // {line_of_keywords}
const PromptTemplate& variantClean();       // {input_text}

const std::vector<const PromptTemplate*>& all();

}  // namespace prompts
}  // namespace lexdrift
