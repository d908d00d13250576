#include "cli/config.hpp"

#include <charconv>
#include <cstdlib>

#include "retrobleu/route_json.hpp"

namespace retrobleu::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "invalid value '" + std::string(text) + "' for " + std::string(key));
  }
  return value;
}

}  // namespace

std::optional<int> parse_radius(std::string_view text) {
  if (text == "none" || text == "-") return std::nullopt;
  const int r = parse_number<int>("radius", text);
  if (r < 0 || r > 2) throw Error(ErrorCode::InvalidArgument, "radius must be 0, 1, 2 or none");
  return r;
}

std::string radius_text(const std::optional<int>& radius) {
  return radius ? std::to_string(*radius) : std::string("none");
}

void ConfigLayer::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "L") {
    length_pivot = parse_number<int>(key, value);
  } else if (key == "n") {
    n = parse_number<std::size_t>(key, value);
  } else if (key == "kind") {
    kind = parse_token_kind(value);
    if (!kind) throw Error(ErrorCode::InvalidArgument, "kind must be 'template' or 'reaction'");
  } else if (key == "radius") {
    radius = parse_radius(value);
  } else if (key == "epsilon") {
    epsilon = parse_number<double>(key, value);
  } else if (key == "yield") {
    yield = parse_number<double>(key, value);
  } else if (key == "prob_floor") {
    prob_floor = parse_number<double>(key, value);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown setting '" + std::string(key) + "'");
  }
}

ConfigLayer ConfigLayer::overlaid_with(const ConfigLayer& over) const {
  ConfigLayer out = *this;
  if (over.length_pivot) out.length_pivot = over.length_pivot;
  if (over.n) out.n = over.n;
  if (over.kind) out.kind = over.kind;
  if (over.radius) out.radius = over.radius;
  if (over.epsilon) out.epsilon = over.epsilon;
  if (over.yield) out.yield = over.yield;
  if (over.prob_floor) out.prob_floor = over.prob_floor;
  return out;
}

void ConfigLayer::apply_to(ScoreConfig& cfg) const {
  if (length_pivot) cfg.length_pivot = *length_pivot;
  if (n) cfg.n = *n;
  if (kind) cfg.kind = *kind;
  if (radius) cfg.radius = *radius;
  if (epsilon) cfg.epsilon = *epsilon;
  if (yield) cfg.yield = *yield;
  if (prob_floor) cfg.prob_floor = *prob_floor;
  if (cfg.kind == TokenKind::Reaction) cfg.radius.reset();
}

ConfigLayer parse_config_text(std::string_view text) {
  ConfigLayer layer;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      layer.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.message());
    }
  }
  return layer;
}

ConfigLayer load_config_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_config_text(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

std::optional<std::filesystem::path> config_path(const std::string& flag_value) {
  if (!flag_value.empty()) return std::filesystem::path(flag_value);
  if (const char* env = std::getenv("RETROBLEU_CONFIG"); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

nlohmann::ordered_json config_json(const ScoreConfig& cfg) {
  nlohmann::ordered_json j;
  j["L"] = cfg.length_pivot;
  j["n"] = cfg.n;
  j["kind"] = std::string(to_string(cfg.kind));
  j["radius"] = cfg.radius ? nlohmann::ordered_json(*cfg.radius) : nlohmann::ordered_json(nullptr);
  j["epsilon"] = cfg.epsilon;
  j["yield"] = cfg.yield;
  j["prob_floor"] = cfg.prob_floor;
  return j;
}

}  // namespace retrobleu::cli
