#include "lexdrift/genclient.hpp"

#include <algorithm>
#include <thread>

#include <httplib.h>

#include "lexdrift/prompts.hpp"
#include "lexdrift/text.hpp"

namespace lexdrift {
namespace {

std::optional<std::string> nonEmpty(std::string s) {
  const auto t = text::trim(s);
  if (t.empty() || t == "\"\"") return std::nullopt;
  return std::string(t);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::string_view toString(EndpointProfile p) noexcept {
  switch (p) {
    case EndpointProfile::BaseModel:
      return "base-model";
    case EndpointProfile::InstructModel:
      return "instruct-model";
    case EndpointProfile::Cleaner:
      return "cleaner";
  }
  return "instruct-model";
}

std::optional<EndpointProfile> parseEndpointProfile(std::string_view s) noexcept {
  if (s == "base-model" || s == "base") return EndpointProfile::BaseModel;
  if (s == "instruct-model" || s == "instruct") return EndpointProfile::InstructModel;
  if (s == "cleaner") return EndpointProfile::Cleaner;
  return std::nullopt;
}

HttpTransport::HttpTransport(std::map<EndpointProfile, HttpProfile> profiles) : profiles_(std::move(profiles)) {}

nlohmann::json HttpTransport::payload(const HttpProfile& profile, const GenerationRequest& request) {
  nlohmann::json body = request.params.is_object() ? request.params : nlohmann::json::object();
  if (!profile.model.empty()) body["model"] = profile.model;
  body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}});
  return body;
}

std::string HttpTransport::completionText(const nlohmann::json& response) {
  const auto& choices = response.at("choices");
  if (!choices.is_array() || choices.empty()) throw TransportError("response has no choices", false);
  const auto& first = choices.front();
  if (first.contains("message") && first["message"].contains("content")) {
    const auto& c = first["message"]["content"];
    return c.is_null() ? std::string{} : c.get<std::string>();
  }
  if (first.contains("text")) return first["text"].get<std::string>();
  throw TransportError("response choice carries no text", false);
}

std::string HttpTransport::send(const GenerationRequest& request) {
  auto it = profiles_.find(request.profile);
  if (it == profiles_.end()) {
    throw ConfigError("no endpoint configured for profile '" + std::string(toString(request.profile)) + "'");
  }
  const HttpProfile& prof = it->second;

  // Split "scheme://host:port/prefix" so the prefix joins the request path.
  std::string origin = prof.baseUrl;
  std::string prefix;
  const auto schemeEnd = origin.find("://");
  const auto pathStart = origin.find('/', schemeEnd == std::string::npos ? 0 : schemeEnd + 3);
  if (pathStart != std::string::npos) {
    prefix = origin.substr(pathStart);
    origin.resize(pathStart);
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  std::string path = prof.path;
  while (!path.empty() && path.front() == '/') path.erase(0, 1);
  const std::string target = prefix + "/" + path;

  httplib::Client cli(origin);
  cli.set_connection_timeout(prof.timeoutSeconds, 0);
  cli.set_read_timeout(prof.timeoutSeconds, 0);
  httplib::Headers headers;
  if (!prof.apiKey.empty()) headers.emplace("Authorization", "Bearer " + prof.apiKey);

  auto res = cli.Post(target, headers, payload(prof, request).dump(), "application/json");
  if (!res) throw TransportError("request to " + origin + target + " failed: " + httplib::to_string(res.error()), true);
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("server returned HTTP " + std::to_string(res->status), true);
  }
  if (res->status != 200) {
    throw TransportError("server returned HTTP " + std::to_string(res->status) + ": " + res->body, false);
  }
  try {
    return completionText(nlohmann::json::parse(res->body));
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed completion response: ") + e.what(), false);
  }
}

RateLimiter::RateLimiter(double perSecond, double burst)
    : perSecond_(perSecond), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (perSecond_ <= 0) return;
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * perSecond_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    // Sleeping under the lock keeps waiters in arrival order.
    std::this_thread::sleep_for(std::chrono::duration<double>((1.0 - tokens_) / perSecond_));
  }
}

GenClient::GenClient(std::shared_ptr<Transport> transport, ClientOptions options)
    : transport_(std::move(transport)), options_(std::move(options)), limiter_(options_.ratePerSecond) {
  if (!transport_) throw ConfigError("generation client needs a transport");
  if (options_.attempts < 1) throw ConfigError("attempts must be at least 1");
}

void GenClient::log(std::string_view message) const {
  if (options_.log) options_.log(message);
}

std::string GenClient::complete(const GenerationRequest& request) {
  if (request.prompt.empty()) throw ValidationError("generation request with empty prompt");
  if (request.maxWords && *request.maxWords == 0) throw ValidationError("max_words must be positive");
  auto backoff = options_.initialBackoff;
  for (int attempt = 1;; ++attempt) {
    limiter_.acquire();
    try {
      std::string out = transport_->send(request);
      if (request.maxWords) out = truncateWords(out, *request.maxWords);
      return out;
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= options_.attempts) {
        throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt) + " attempt(s))",
                             e.retryable(), attempt);
      }
      log("attempt " + std::to_string(attempt) + " failed: " + e.what() + "; retrying");
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

std::string truncateWords(std::string_view s, std::size_t maxWords) {
  std::size_t words = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && text::isSpace(s[i])) ++i;
    if (i >= s.size()) break;
    if (words == maxWords) return std::string(text::trim(s.substr(0, i)));
    while (i < s.size() && !text::isSpace(s[i])) ++i;
    ++words;
  }
  return std::string(s);
}

std::optional<std::string> continueAbstract(GenClient& client, std::string_view firstHalf, EndpointProfile profile,
                                            const nlohmann::json& params) {
  if (text::trim(firstHalf).empty()) throw ValidationError("continue_abstract: first half is empty");
  GenerationRequest req;
  req.profile = profile;
  req.prompt = prompts::continuation().render({{"first_half", std::string(firstHalf)}});
  req.maxWords = 2 * text::splitWords(firstHalf).size();
  req.params = params;
  return nonEmpty(client.complete(req));
}

std::optional<std::string> summarizeKeywords(GenClient& client, std::string_view abstractText,
                                             const nlohmann::json& params) {
  if (text::trim(abstractText).empty()) throw ValidationError("summarize_keywords: abstract is empty");
  GenerationRequest req;
  req.profile = EndpointProfile::Cleaner;
  req.prompt = prompts::keywordSummary().render({{"input_text", std::string(abstractText)}});
  req.params = params;
  const std::string raw = client.complete(req);

  std::string joined;
  std::size_t lines = 0;
  std::size_t start = 0;
  while (start <= raw.size()) {
    const auto nl = raw.find('\n', start);
    const auto line = text::trim(std::string_view(raw).substr(start, nl == std::string::npos ? nl : nl - start));
    if (!line.empty()) {
      if (!joined.empty()) joined += ", ";
      joined += line;
      ++lines;
    }
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  if (lines > 1) client.log("keyword summary spanned " + std::to_string(lines) + " lines; joined with ', '");
  return nonEmpty(std::move(joined));
}

std::optional<std::string> generateVariant(GenClient& client, std::string_view keywordLine,
                                           const nlohmann::json& params) {
  if (text::trim(keywordLine).empty()) throw ValidationError("generate_variant: keyword line is empty");
  GenerationRequest req;
  req.profile = EndpointProfile::InstructModel;
  req.prompt = prompts::variant().render({{"line_of_keywords", std::string(keywordLine)}});
  req.params = params;
  return nonEmpty(client.complete(req));
}

std::optional<std::string> cleanText(GenClient& client, std::string_view textIn, CleanMode mode,
                                     const nlohmann::json& params) {
  if (text::trim(textIn).empty()) throw ValidationError("clean_text: input is empty");
  const auto& tpl = mode == CleanMode::Continuation ? prompts::continuationClean() : prompts::variantClean();
  GenerationRequest req;
  req.profile = EndpointProfile::Cleaner;
  req.prompt = tpl.render({{"input_text", std::string(textIn)}});
  req.params = params;
  return nonEmpty(client.complete(req));
}

nlohmann::json variantParams(const nlohmann::json& params, std::uint64_t baseSeed, std::size_t index) {
  nlohmann::json p = params.is_object() ? params : nlohmann::json::object();
  p["seed"] = splitmix64(baseSeed ^ splitmix64(index)) & 0x7FFFFFFFull;
  return p;
}

}  // namespace lexdrift
