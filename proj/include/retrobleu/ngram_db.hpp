#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "retrobleu/route.hpp"

namespace retrobleu {

/// Joins tokens with TAB. Throws InvalidToken for empty tokens or tokens
/// containing TAB, CR or LF.
std::string make_key(std::span<const std::string> tokens);
void append_key_token(std::string& key, std::string_view token);
std::vector<std::string> split_key(std::string_view key);

/// Orders keys as tuples of tokens (TAB sorts before every other byte).
bool key_less(std::string_view a, std::string_view b);

struct KeyHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
};

/// Known n-grams of one (order, token kind, template radius) with
/// occurrence counts.
class NgramDatabase {
 public:
  using Map = std::unordered_map<std::string, std::uint64_t, KeyHash, std::equal_to<>>;

  NgramDatabase(std::size_t n, TokenKind kind, std::optional<int> radius = std::nullopt);

  std::size_t n() const { return n_; }
  TokenKind kind() const { return kind_; }
  /// Always empty for reaction tokens.
  std::optional<int> radius() const { return radius_; }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::uint64_t total_count() const { return total_; }
  std::uint64_t source_route_count() const { return routes_; }

  /// Throws ArityMismatch / KindMismatch when `g` does not fit the database.
  bool contains(const Ngram& g) const;
  bool contains_key(std::string_view key) const { return entries_.find(key) != entries_.end(); }
  std::uint64_t count(std::string_view key) const;

  void add(const Ngram& g, std::uint64_t count = 1);
  /// `key` must hold exactly n TAB-separated tokens.
  void add_key(std::string_view key, std::uint64_t count = 1);
  void add_source_routes(std::uint64_t routes) { routes_ += routes; }
  void reserve(std::size_t entries) { entries_.reserve(entries); }

  const Map& entries() const { return entries_; }
  /// Entries ordered by `key_less`.
  std::vector<std::pair<std::string_view, std::uint64_t>> sorted_entries() const;

  bool operator==(const NgramDatabase& other) const;

 private:
  friend NgramDatabase merge(const NgramDatabase& a, const NgramDatabase& b);
  friend class DbBuilder;

  std::size_t n_;
  TokenKind kind_;
  std::optional<int> radius_;
  Map entries_;
  std::uint64_t total_ = 0;
  std::uint64_t routes_ = 0;
};

/// Streaming construction from a route corpus. Routes sharing any patent id
/// with `excluded_patents` are skipped; routes without patent ids never are.
class DbBuilder {
 public:
  DbBuilder(std::size_t n, TokenKind kind, std::optional<int> radius = std::nullopt,
            std::set<std::string> excluded_patents = {});

  /// Adds every n-gram of `route`. Returns false if the route was excluded.
  /// A route that fails (MissingToken, MixedRadius, InvalidToken) leaves the
  /// database unchanged.
  bool add_route(const RouteTree& route);

  std::uint64_t excluded_routes() const { return excluded_count_; }
  const NgramDatabase& db() const { return db_; }
  NgramDatabase finish() && { return std::move(db_); }

 private:
  NgramDatabase db_;
  std::set<std::string> excluded_patents_;
  std::uint64_t excluded_count_ = 0;
  std::vector<std::string> scratch_;
};

NgramDatabase build_db(std::span<const RouteTree> corpus, std::size_t n, TokenKind kind,
                       std::optional<int> radius = std::nullopt,
                       const std::set<std::string>& excluded_patents = {});

/// Pointwise sum. Throws ArityMismatch, KindMismatch or MixedRadius.
NgramDatabase merge(const NgramDatabase& a, const NgramDatabase& b);

/// Throws ArityMismatch / KindMismatch / MixedRadius unless both databases
/// describe the same kind of n-gram. An undeclared radius matches any radius.
void require_compatible(const NgramDatabase& a, const NgramDatabase& b);

// On-disk format, one LF-terminated line each:
//   RETROBLEU-NGRAMDB v1<TAB>n=<n><TAB>kind=<kind><TAB>radius=<r|-><TAB>routes=<count>
//   <count><TAB><tok1><TAB>...<TAB><tokn>      (sorted by token columns)
void write_db(const NgramDatabase& db, std::ostream& out);
NgramDatabase read_db(std::istream& in);
void save_db(const NgramDatabase& db, const std::filesystem::path& path);
NgramDatabase load_db(const std::filesystem::path& path);

}  // namespace retrobleu
