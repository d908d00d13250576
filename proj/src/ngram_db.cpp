#include "retrobleu/ngram_db.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace retrobleu {

namespace {

constexpr std::string_view kMagic = "RETROBLEU-NGRAMDB";
constexpr std::string_view kVersion = "v1";

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename T>
std::optional<T> parse_uint(std::string_view s) {
  if (s.empty() || s.front() == '+' || s.front() == '-') return std::nullopt;
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

[[noreturn]] void corrupt(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::CorruptRecord, "line " + std::to_string(line) + ": " + what);
}

std::string radius_text(std::optional<int> r) { return r ? std::to_string(*r) : "-"; }

}  // namespace

void append_key_token(std::string& key, std::string_view token) {
  if (token.empty()) throw Error(ErrorCode::InvalidToken, "empty n-gram token");
  if (token.find_first_of("\t\r\n") != std::string_view::npos) {
    throw Error(ErrorCode::InvalidToken, "token contains TAB or newline: '" + std::string(token) + "'");
  }
  if (!key.empty()) key.push_back('\t');
  key.append(token);
}

std::string make_key(std::span<const std::string> tokens) {
  std::string key;
  for (const auto& t : tokens) append_key_token(key, t);
  return key;
}

std::vector<std::string> split_key(std::string_view key) {
  std::vector<std::string> out;
  for (auto f : split_tabs(key)) out.emplace_back(f);
  return out;
}

bool key_less(std::string_view a, std::string_view b) {
  const std::size_t len = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < len; ++i) {
    const auto ca = static_cast<unsigned char>(a[i]);
    const auto cb = static_cast<unsigned char>(b[i]);
    if (ca == cb) continue;
    if (ca == '\t') return true;
    if (cb == '\t') return false;
    return ca < cb;
  }
  return a.size() < b.size();
}

NgramDatabase::NgramDatabase(std::size_t n, TokenKind kind, std::optional<int> radius)
    : n_(n), kind_(kind), radius_(kind == TokenKind::Template ? radius : std::nullopt) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "n-gram order must be >= 2");
  if (radius_ && (*radius_ < 0 || *radius_ > 2)) {
    throw Error(ErrorCode::InvalidArgument, "template radius must be in 0..2");
  }
}

bool NgramDatabase::contains(const Ngram& g) const {
  if (g.n() != n_) {
    throw Error(ErrorCode::ArityMismatch, "query has " + std::to_string(g.n()) +
                                              " tokens, database order is " + std::to_string(n_));
  }
  if (g.kind != kind_) {
    throw Error(ErrorCode::KindMismatch, "query kind " + std::string(to_string(g.kind)) +
                                             " against a " + std::string(to_string(kind_)) +
                                             " database");
  }
  return contains_key(make_key(g.tokens));
}

std::uint64_t NgramDatabase::count(std::string_view key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? 0 : it->second;
}

void NgramDatabase::add(const Ngram& g, std::uint64_t count) {
  if (g.kind != kind_) throw Error(ErrorCode::KindMismatch, "n-gram kind differs from database");
  if (g.n() != n_) throw Error(ErrorCode::ArityMismatch, "n-gram order differs from database");
  add_key(make_key(g.tokens), count);
}

void NgramDatabase::add_key(std::string_view key, std::uint64_t count) {
  if (count == 0) throw Error(ErrorCode::InvalidArgument, "n-gram count must be positive");
  const auto fields = split_tabs(key);
  if (fields.size() != n_) {
    throw Error(ErrorCode::ArityMismatch, "key has " + std::to_string(fields.size()) +
                                              " tokens, database order is " + std::to_string(n_));
  }
  for (auto f : fields) {
    if (f.empty() || f.find_first_of("\r\n") != std::string_view::npos) {
      throw Error(ErrorCode::InvalidToken, "empty token or newline in key");
    }
  }
  if (auto it = entries_.find(key); it != entries_.end()) {
    it->second += count;
  } else {
    entries_.emplace(std::string(key), count);
  }
  total_ += count;
}

std::vector<std::pair<std::string_view, std::uint64_t>> NgramDatabase::sorted_entries() const {
  std::vector<std::pair<std::string_view, std::uint64_t>> out;
  out.reserve(entries_.size());
  for (const auto& [k, c] : entries_) out.emplace_back(k, c);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return key_less(a.first, b.first); });
  return out;
}

bool NgramDatabase::operator==(const NgramDatabase& other) const {
  return n_ == other.n_ && kind_ == other.kind_ && radius_ == other.radius_ &&
         routes_ == other.routes_ && total_ == other.total_ && entries_ == other.entries_;
}

DbBuilder::DbBuilder(std::size_t n, TokenKind kind, std::optional<int> radius,
                     std::set<std::string> excluded_patents)
    : db_(n, kind, radius), excluded_patents_(std::move(excluded_patents)) {}

bool DbBuilder::add_route(const RouteTree& route) {
  for (const auto& p : route.source_patent_ids()) {
    if (excluded_patents_.count(p)) {
      ++excluded_count_;
      return false;
    }
  }

  std::optional<int> radius = db_.radius_;
  if (db_.kind_ == TokenKind::Template) {
    for (const auto& rxn : route.reactions()) {
      const auto declared = rxn.data.template_radius;
      if (!declared) continue;
      if (!radius) {
        radius = declared;
      } else if (*radius != *declared) {
        throw Error(ErrorCode::MixedRadius, "route '" + route.route_id() + "' declares template radius " +
                                                std::to_string(*declared) + ", database radius is " +
                                                std::to_string(*radius));
      }
    }
  }

  scratch_.clear();
  const TokenKind kind = db_.kind_;
  for_each_chain(route, db_.n_, [&](std::span<const ReactionId> chain) {
    std::string key;
    for (ReactionId id : chain) append_key_token(key, reaction_token(route, id, kind));
    scratch_.push_back(std::move(key));
  });

  db_.radius_ = radius;
  for (const auto& key : scratch_) db_.add_key(key);
  db_.routes_ += 1;
  return true;
}

NgramDatabase build_db(std::span<const RouteTree> corpus, std::size_t n, TokenKind kind,
                       std::optional<int> radius, const std::set<std::string>& excluded_patents) {
  DbBuilder builder(n, kind, radius, excluded_patents);
  for (const auto& route : corpus) builder.add_route(route);
  return std::move(builder).finish();
}

void require_compatible(const NgramDatabase& a, const NgramDatabase& b) {
  if (a.n() != b.n()) {
    throw Error(ErrorCode::ArityMismatch,
                "n-gram orders differ: " + std::to_string(a.n()) + " vs " + std::to_string(b.n()));
  }
  if (a.kind() != b.kind()) {
    throw Error(ErrorCode::KindMismatch, "token kinds differ: " + std::string(to_string(a.kind())) +
                                             " vs " + std::string(to_string(b.kind())));
  }
  if (a.radius() && b.radius() && *a.radius() != *b.radius()) {
    throw Error(ErrorCode::MixedRadius,
                "template radii differ: " + radius_text(a.radius()) + " vs " + radius_text(b.radius()));
  }
}

NgramDatabase merge(const NgramDatabase& a, const NgramDatabase& b) {
  require_compatible(a, b);
  NgramDatabase out = a.size() >= b.size() ? a : b;
  const NgramDatabase& other = a.size() >= b.size() ? b : a;
  for (const auto& [key, count] : other.entries_) out.add_key(key, count);
  out.routes_ += other.routes_;
  if (!out.radius_) out.radius_ = other.radius_;
  return out;
}

void write_db(const NgramDatabase& db, std::ostream& out) {
  out << kMagic << ' ' << kVersion << "\tn=" << db.n() << "\tkind=" << to_string(db.kind())
      << "\tradius=" << radius_text(db.radius()) << "\troutes=" << db.source_route_count() << '\n';
  for (const auto& [key, count] : db.sorted_entries()) out << count << '\t' << key << '\n';
}

NgramDatabase read_db(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::BadMagic, "empty database file");
  const auto header = split_tabs(line);
  const auto space = header[0].find(' ');
  if (header[0].substr(0, space) != kMagic) throw Error(ErrorCode::BadMagic, "not an n-gram database");
  if (space == std::string_view::npos || header[0].substr(space + 1) != kVersion) {
    throw Error(ErrorCode::VersionMismatch, "unsupported database version '" +
                                                std::string(space == std::string_view::npos
                                                                ? std::string_view{}
                                                                : header[0].substr(space + 1)) +
                                                "'");
  }
  if (header.size() != 5) corrupt(1, "header must have 5 fields");
  auto field = [&](std::size_t i, std::string_view name) {
    const auto f = header[i];
    if (f.substr(0, name.size()) != name || f.size() <= name.size() || f[name.size()] != '=') {
      corrupt(1, "expected header field '" + std::string(name) + "='");
    }
    return f.substr(name.size() + 1);
  };
  const auto n = parse_uint<std::size_t>(field(1, "n"));
  if (!n || *n < 2) corrupt(1, "invalid n");
  const auto kind = parse_token_kind(field(2, "kind"));
  if (!kind) corrupt(1, "invalid kind");
  std::optional<int> radius;
  if (const auto r = field(3, "radius"); r != "-") {
    const auto v = parse_uint<int>(r);
    if (!v || *v > 2 || *kind != TokenKind::Template) corrupt(1, "invalid radius");
    radius = *v;
  }
  const auto routes = parse_uint<std::uint64_t>(field(4, "routes"));
  if (!routes) corrupt(1, "invalid routes count");

  NgramDatabase db(*n, *kind, radius);
  db.add_source_routes(*routes);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) corrupt(line_no, "missing TAB after count");
    const auto count = parse_uint<std::uint64_t>(std::string_view(line).substr(0, tab));
    if (!count || *count == 0) corrupt(line_no, "invalid count");
    const std::string_view key = std::string_view(line).substr(tab + 1);
    if (db.contains_key(key)) corrupt(line_no, "duplicate record");
    try {
      db.add_key(key, *count);
    } catch (const Error& e) {
      corrupt(line_no, e.message());
    }
  }
  if (in.bad()) throw Error(ErrorCode::Io, "read failed");
  return db;
}

void save_db(const NgramDatabase& db, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  write_db(db, out);
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

NgramDatabase load_db(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  try {
    return read_db(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

}  // namespace retrobleu
