#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace retrobleu::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Record written next to every output so a run can be repeated exactly.
/// Holds no timestamps or host details.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<std::string> inputs;
  std::optional<std::string> db;
  std::vector<std::string> outputs;
  std::string corpus_sha256;
  std::string version = kToolVersion;

  nlohmann::ordered_json to_json() const;
};

/// SHA-256 over the contents of `files` in order, each prefixed by its byte
/// length. Throws Io if a file cannot be read.
std::string fingerprint_files(std::span<const std::filesystem::path> files);

std::filesystem::path manifest_path_for(const std::filesystem::path& output);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace retrobleu::cli
