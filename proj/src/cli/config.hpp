#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "retrobleu/scoring.hpp"

namespace retrobleu::cli {

/// Settings that were explicitly provided by one source (a config file or
/// the command line). Unset fields fall through to the next source.
struct ConfigLayer {
  std::optional<int> length_pivot;
  std::optional<std::size_t> n;
  std::optional<TokenKind> kind;
  std::optional<std::optional<int>> radius;
  std::optional<double> epsilon;
  std::optional<double> yield;
  std::optional<double> prob_floor;

  /// Accepts the keys L, n, kind, radius, epsilon, yield and prob_floor.
  /// Throws InvalidArgument for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  /// `over` wins wherever it has a value.
  ConfigLayer overlaid_with(const ConfigLayer& over) const;
  void apply_to(ScoreConfig& cfg) const;
};

/// `key = value` lines; blank lines and `#` comments are ignored.
ConfigLayer parse_config_text(std::string_view text);
ConfigLayer load_config_file(const std::filesystem::path& path);

/// The explicit path if given, otherwise RETROBLEU_CONFIG if set.
std::optional<std::filesystem::path> config_path(const std::string& flag_value);

std::optional<int> parse_radius(std::string_view text);
std::string radius_text(const std::optional<int>& radius);

nlohmann::ordered_json config_json(const ScoreConfig& cfg);

}  // namespace retrobleu::cli
