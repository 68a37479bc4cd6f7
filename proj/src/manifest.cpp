#include "lexdrift/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <memory>

#include "lexdrift/error.hpp"

namespace lexdrift {
namespace {

using MdCtx = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;

std::string hexDigest(const unsigned char* md, unsigned len) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

MdCtx newSha256() {
  MdCtx ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
  return ctx;
}

std::string finish(EVP_MD_CTX* ctx) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned len = 0;
  if (EVP_DigestFinal_ex(ctx, md.data(), &len) != 1) throw Error("SHA-256 final failed");
  return hexDigest(md.data(), len);
}

nlohmann::ordered_json digestJson(const FileDigest& d) {
  nlohmann::ordered_json j;
  j["path"] = d.path;
  j["sha256"] = d.sha256;
  j["bytes"] = d.bytes;
  return j;
}

}  // namespace

std::string sha256Hex(std::string_view bytes) {
  auto ctx = newSha256();
  if (EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1) throw Error("SHA-256 update failed");
  return finish(ctx.get());
}

std::string sha256File(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  auto ctx = newSha256();
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount())) != 1) {
      throw Error("SHA-256 update failed");
    }
  }
  return finish(ctx.get());
}

std::string manifestTimestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (*end == '\0' && v >= 0) t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

FileDigest digestFile(const std::filesystem::path& path) {
  return {path.string(), sha256File(path), std::filesystem::file_size(path)};
}

nlohmann::ordered_json RunManifest::toJson() const {
  nlohmann::ordered_json j;
  j["tool"] = "lexdrift";
  j["version"] = kToolVersion;
  j["subcommand"] = subcommand;
  j["config"] = config;
  auto files = [](const std::vector<FileDigest>& v) {
    auto a = nlohmann::ordered_json::array();
    for (const auto& d : v) a.push_back(digestJson(d));
    return a;
  };
  j["inputs"] = files(inputs);
  j["outputs"] = files(outputs);
  nlohmann::ordered_json s = nlohmann::ordered_json::object();
  for (const auto& [name, value] : seeds) s[name] = value;
  j["seeds"] = std::move(s);
  j["started_at"] = startedAt;
  j["finished_at"] = finishedAt;
  return j;
}

void RunManifest::writeBesideOutputs() const {
  const auto text = toJson().dump(2) + "\n";
  for (const auto& out : outputs) {
    const auto path = out.path + ".manifest.json";
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << text;
    if (!f) throw Error("cannot write manifest '" + path + "'");
  }
}

std::vector<std::string> verifyInputs(const nlohmann::json& manifest) {
  std::vector<std::string> bad;
  for (const auto& in : manifest.at("inputs")) {
    const auto path = in.at("path").get<std::string>();
    std::error_code ec;
    if (!std::filesystem::exists(path, ec) || sha256File(path) != in.at("sha256").get<std::string>()) {
      bad.push_back(path);
    }
  }
  return bad;
}

}  // namespace lexdrift
