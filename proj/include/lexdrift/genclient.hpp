#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lexdrift/error.hpp"

namespace lexdrift {

enum class EndpointProfile { BaseModel, InstructModel, Cleaner };

std::string_view toString(EndpointProfile p) noexcept;
std::optional<EndpointProfile> parseEndpointProfile(std::string_view s) noexcept;

struct GenerationRequest {
  EndpointProfile profile = EndpointProfile::InstructModel;
  std::string prompt;
  std::optional<std::size_t> maxWords;
  nlohmann::json params = nlohmann::json::object();  // decoding parameters, passed through verbatim
};

class TransportError : public Error {
 public:
  TransportError(const std::string& what, bool retryable, int attempts = 1)
      : Error(what), retryable_(retryable), attempts_(attempts) {}

  bool retryable() const noexcept { return retryable_; }
  int attempts() const noexcept { return attempts_; }

 private:
  bool retryable_;
  int attempts_;
};

/// Sends one rendered prompt and returns the raw completion text.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string send(const GenerationRequest& request) = 0;
};

/// Connection settings for one chat-completion-compatible endpoint.
struct HttpProfile {
  std::string baseUrl = "http://127.0.0.1:8000";
  std::string path = "v1/chat/completions";
  std::string model;
  std::string apiKey;
  int timeoutSeconds = 120;
};

/// POST {baseUrl}/{path} with {"model", "messages": [{"role": "user", "content": prompt}], ...params}.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::map<EndpointProfile, HttpProfile> profiles);
  std::string send(const GenerationRequest& request) override;

  static nlohmann::json payload(const HttpProfile& profile, const GenerationRequest& request);
  /// Extracts choices[0].message.content (or choices[0].text).
  static std::string completionText(const nlohmann::json& response);

 private:
  std::map<EndpointProfile, HttpProfile> profiles_;
};

/// Token bucket shared by every caller of a client.
class RateLimiter {
 public:
  explicit RateLimiter(double perSecond, double burst = 1.0);
  void acquire();

 private:
  std::mutex mutex_;
  double perSecond_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

struct ClientOptions {
  int attempts = 3;
  std::chrono::milliseconds initialBackoff{1000};
  double ratePerSecond = 2.0;
  std::function<void(std::string_view)> log;
};

class GenClient {
 public:
  GenClient(std::shared_ptr<Transport> transport, ClientOptions options = {});

  /// Rate-limited send with exponential-backoff retries on retryable failures.
  std::string complete(const GenerationRequest& request);
  void log(std::string_view message) const;

 private:
  std::shared_ptr<Transport> transport_;
  ClientOptions options_;
  RateLimiter limiter_;
};

/// Keeps the text up to the end of its `maxWords`-th word.
std::string truncateWords(std::string_view text, std::size_t maxWords);

// Each returns std::nullopt when the model produced nothing (the empty-output signal).
std::optional<std::string> continueAbstract(GenClient& client, std::string_view firstHalf,
                                            EndpointProfile profile = EndpointProfile::InstructModel,
                                            const nlohmann::json& params = nlohmann::json::object());
std::optional<std::string> summarizeKeywords(GenClient& client, std::string_view abstractText,
                                             const nlohmann::json& params = nlohmann::json::object());
std::optional<std::string> generateVariant(GenClient& client, std::string_view keywordLine,
                                           const nlohmann::json& params = nlohmann::json::object());

enum class CleanMode { Continuation, Variant };
std::optional<std::string> cleanText(GenClient& client, std::string_view text, CleanMode mode,
                                     const nlohmann::json& params = nlohmann::json::object());

/// Decoding parameters for the i-th of a batch of variants: `params` plus an independent seed.
nlohmann::json variantParams(const nlohmann::json& params, std::uint64_t baseSeed, std::size_t index);

}  // namespace lexdrift
