#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace lexdrift {

inline constexpr const char* kToolVersion = "0.1.0";

std::string sha256Hex(std::string_view bytes);
/// Throws Error if the file cannot be read.
std::string sha256File(const std::filesystem::path& path);

/// UTC ISO-8601 time; honors SOURCE_DATE_EPOCH so reproducible runs get identical manifests.
std::string manifestTimestamp();

struct FileDigest {
  std::string path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

FileDigest digestFile(const std::filesystem::path& path);

struct RunManifest {
  std::string subcommand;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  std::string startedAt;
  std::string finishedAt;

  nlohmann::ordered_json toJson() const;
  /// Writes `<output>.manifest.json` next to every output.
  void writeBesideOutputs() const;
};

/// Re-hashes the inputs listed in a manifest; returns the paths whose digest no longer matches.
std::vector<std::string> verifyInputs(const nlohmann::json& manifest);

}  // namespace lexdrift
