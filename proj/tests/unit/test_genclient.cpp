#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <thread>

#include "lexdrift/genclient.hpp"
#include "lexdrift/prompts.hpp"
#include "lexdrift/text.hpp"

#include <httplib.h>

using namespace lexdrift;
using nlohmann::json;

namespace {

// Local chat-completion stand-in. `reply` maps the request body to {status, completion}.
class MockServer {
 public:
  using Handler = std::function<std::pair<int, std::string>(const json&, const httplib::Request&)>;

  explicit MockServer(Handler reply) : reply_(std::move(reply)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      const auto body = json::parse(req.body);
      last = body;
      lastAuth = req.get_header_value("Authorization");
      const auto [status, content] = reply_(body, req);
      res.status = status;
      if (status == 200) {
        res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump(),
                        "application/json");
      } else {
        res.set_content(content, "text/plain");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::shared_ptr<Transport> transport(std::string apiKey = "") const {
    std::map<EndpointProfile, HttpProfile> profiles;
    for (auto p : {EndpointProfile::BaseModel, EndpointProfile::InstructModel, EndpointProfile::Cleaner}) {
      HttpProfile hp;
      hp.baseUrl = "http://127.0.0.1:" + std::to_string(port_);
      hp.model = std::string(toString(p));
      hp.apiKey = apiKey;
      hp.timeoutSeconds = 5;
      profiles[p] = hp;
    }
    return std::make_shared<HttpTransport>(profiles);
  }

  std::atomic<int> calls{0};
  json last;
  std::string lastAuth;

 private:
  Handler reply_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ClientOptions fast() {
  ClientOptions o;
  o.initialBackoff = std::chrono::milliseconds(1);
  o.ratePerSecond = 0;
  return o;
}

std::string prompt(const json& body) { return body.at("messages").at(0).at("content").get<std::string>(); }

std::string nWords(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
  return s;
}

}  // namespace

TEST(Truncate, Words) {
  EXPECT_EQ(truncateWords("a b c d", 2), "a b");
  EXPECT_EQ(truncateWords("a  b\n c", 5), "a  b\n c");
  EXPECT_EQ(truncateWords("  a b ", 1), "a");
  EXPECT_EQ(truncateWords("", 3), "");
}

TEST(GenClient, ContinuationPromptAndCap) {
  MockServer server([](const json&, const httplib::Request&) { return std::pair{200, nWords(150)}; });
  GenClient client(server.transport(), fast());
  const auto half = nWords(50);
  const auto out = continueAbstract(client, half, EndpointProfile::BaseModel);
  ASSERT_TRUE(out);
  EXPECT_EQ(text::splitWords(*out).size(), 100u);
  EXPECT_EQ(prompt(server.last), prompts::continuation().render({{"first_half", half}}));
  EXPECT_EQ(server.last.at("model"), "base-model");
  EXPECT_THROW(continueAbstract(client, "  "), ValidationError);
}

TEST(GenClient, ContinuationNeverExceedsTwiceInput) {
  MockServer server([](const json& b, const httplib::Request&) {
    return std::pair{200, nWords(prompt(b).size() % 97)};
  });
  GenClient client(server.transport(), fast());
  for (std::size_t n = 1; n < 40; n += 3) {
    const auto out = continueAbstract(client, nWords(n));
    if (out) EXPECT_LE(text::splitWords(*out).size(), 2 * n);
  }
}

TEST(GenClient, KeywordsTrimmedAndJoined) {
  std::vector<std::string> logs;
  auto opts = fast();
  opts.log = [&](std::string_view m) { logs.emplace_back(m); };
  MockServer server([](const json& b, const httplib::Request&) {
    return std::pair{200, prompt(b).find("ONE") != std::string::npos ? std::string("mice, sleep  \n")
                                                                     : std::string("mice, sleep\n\nmemory \n")};
  });
  GenClient client(server.transport(), opts);
  EXPECT_EQ(*summarizeKeywords(client, "ONE"), "mice, sleep");
  EXPECT_TRUE(logs.empty());
  EXPECT_EQ(*summarizeKeywords(client, "TWO"), "mice, sleep, memory");
  EXPECT_EQ(logs.size(), 1u);
  EXPECT_EQ(prompt(server.last), prompts::keywordSummary().render({{"input_text", "TWO"}}));
}

TEST(GenClient, VariantPromptAndSeedPassThrough) {
  MockServer server([](const json&, const httplib::Request&) { return std::pair{200, std::string("An abstract.")}; });
  GenClient client(server.transport(), fast());
  const json params = {{"temperature", 0.9}};
  EXPECT_EQ(*generateVariant(client, "mice, sleep", variantParams(params, 7, 3)), "An abstract.");
  EXPECT_EQ(prompt(server.last), prompts::variant().render({{"line_of_keywords", "mice, sleep"}}));
  EXPECT_EQ(server.last.at("temperature"), 0.9);
  EXPECT_EQ(server.last.at("seed"), variantParams(params, 7, 3).at("seed"));
  EXPECT_THROW(generateVariant(client, ""), ValidationError);

  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < 500; ++i) seeds.insert(variantParams(params, 7, i).at("seed").get<std::uint64_t>());
  EXPECT_EQ(seeds.size(), 500u);
  EXPECT_EQ(variantParams(params, 7, 3), variantParams(params, 7, 3));
}

TEST(GenClient, CleanerEchoAndEmptySignal) {
  MockServer server([](const json& b, const httplib::Request&) {
    const auto p = prompt(b);
    if (p.find("ALLCOMMENT") != std::string::npos) return std::pair{200, std::string("")};
    const auto open = p.find("\n\n\"") + 3;
    return std::pair{200, p.substr(open, p.find("\"\n\n", open) - open)};
  });
  GenClient client(server.transport(), fast());
  EXPECT_EQ(*cleanText(client, "Cells divide.", CleanMode::Continuation), "Cells divide.");
  EXPECT_EQ(prompt(server.last), prompts::continuationClean().render({{"input_text", "Cells divide."}}));
  EXPECT_EQ(*cleanText(client, "Cells divide.", CleanMode::Variant), "Cells divide.");
  EXPECT_EQ(prompt(server.last), prompts::variantClean().render({{"input_text", "Cells divide."}}));
  EXPECT_FALSE(cleanText(client, "ALLCOMMENT", CleanMode::Continuation));
}

TEST(GenClient, RetriesTransientFailures) {
  std::atomic<int> n{0};
  MockServer server([&](const json&, const httplib::Request&) {
    return ++n < 3 ? std::pair{503, std::string("busy")} : std::pair{200, std::string("ok")};
  });
  GenClient client(server.transport(), fast());
  EXPECT_EQ(*generateVariant(client, "k"), "ok");
  EXPECT_EQ(server.calls.load(), 3);
}

TEST(GenClient, GivesUpWithAttemptCount) {
  MockServer server([](const json&, const httplib::Request&) { return std::pair{500, std::string("down")}; });
  GenClient client(server.transport(), fast());
  try {
    generateVariant(client, "k");
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.attempts(), 3);
    EXPECT_TRUE(e.retryable());
  }
  EXPECT_EQ(server.calls.load(), 3);
}

TEST(GenClient, ClientErrorsAreNotRetried) {
  MockServer server([](const json&, const httplib::Request&) { return std::pair{400, std::string("bad")}; });
  GenClient client(server.transport(), fast());
  EXPECT_THROW(generateVariant(client, "k"), TransportError);
  EXPECT_EQ(server.calls.load(), 1);
}

TEST(GenClient, AuthHeader) {
  MockServer server([](const json&, const httplib::Request&) { return std::pair{200, std::string("x")}; });
  GenClient with(server.transport("sk-test"), fast());
  generateVariant(with, "k");
  EXPECT_EQ(server.lastAuth, "Bearer sk-test");
  GenClient without(server.transport(), fast());
  generateVariant(without, "k");
  EXPECT_EQ(server.lastAuth, "");
}

TEST(GenClient, ConnectionRefusedIsRetryable) {
  std::map<EndpointProfile, HttpProfile> profiles;
  profiles[EndpointProfile::InstructModel] = {"http://127.0.0.1:1", "v1/chat/completions", "m", "", 1};
  GenClient client(std::make_shared<HttpTransport>(profiles), fast());
  try {
    generateVariant(client, "k");
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_THROW(cleanText(client, "x", CleanMode::Variant), ConfigError);
}

TEST(RateLimiter, SpacesRequests) {
  RateLimiter limiter(50);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 6; ++i) limiter.acquire();
  EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(90));
}
