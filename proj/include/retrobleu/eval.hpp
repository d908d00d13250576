#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "retrobleu/ngram_db.hpp"
#include "retrobleu/route.hpp"
#include "retrobleu/scoring.hpp"

namespace retrobleu {

enum class Metric { RetroBleu, Badowski, CumLogProb, Length, BigramRatio };
enum class Direction { HigherIsBetter, LowerIsBetter };

inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::RetroBleu, Metric::Badowski,
                                                      Metric::CumLogProb, Metric::Length,
                                                      Metric::BigramRatio};

std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view text);

constexpr Direction direction(Metric metric) {
  switch (metric) {
    case Metric::Badowski:
    case Metric::Length:
      return Direction::LowerIsBetter;
    case Metric::RetroBleu:
    case Metric::CumLogProb:
    case Metric::BigramRatio:
      break;
  }
  return Direction::HigherIsBetter;
}

double metric_value(const ScoreReport& report, Metric metric);

struct TargetCase {
  std::string target_id;
  RouteTree reference;
  std::vector<RouteTree> candidates;
};

struct RankingResult {
  std::string target_id;
  Metric metric = Metric::RetroBleu;
  std::size_t best_rank = 1;
  std::size_t worst_rank = 1;
  std::size_t pool_size = 1;

  bool operator==(const RankingResult&) const = default;
};

struct Ranks {
  std::size_t best = 1;
  std::size_t worst = 1;
  std::size_t pool_size = 1;
};

/// Rank of `reference` in the pool {reference} + candidates when it is
/// placed first (best) or last (worst) among equal scores.
Ranks rank_among(double reference, std::span<const double> candidates, Direction dir);

/// Scores routes against a known n-gram database. The bigram-ratio metric
/// uses `db` itself when it holds bigrams, otherwise a separate bigram
/// database must be supplied.
class RouteScorer {
 public:
  RouteScorer(const NgramDatabase& db, ScoreConfig cfg);
  RouteScorer(const NgramDatabase& db, const NgramDatabase& bigram_db, ScoreConfig cfg);

  /// Full report; throws ArityMismatch when no bigram database is available.
  ScoreReport score(const RouteTree& route) const;
  /// A single metric.
  double value(const RouteTree& route, Metric metric) const;

  const ScoreConfig& config() const { return cfg_; }
  const NgramDatabase& db() const { return *db_; }
  bool has_bigram_db() const { return bigram_db_ != nullptr; }
  const NgramDatabase& bigram_db() const;

 private:
  const NgramDatabase* db_;
  const NgramDatabase* bigram_db_;
  ScoreConfig cfg_;
};

/// Ranks the reference against the candidates. Candidates identical to the
/// reference route are dropped from the pool.
RankingResult rank_case(const TargetCase& tc, Metric metric, const NgramDatabase& db,
                        const ScoreConfig& cfg);
/// One result per metric.
std::vector<RankingResult> rank_case(const TargetCase& tc, std::span<const Metric> metrics,
                                     const RouteScorer& scorer);

struct TopkRow {
  std::size_t k = 0;
  double best_accuracy = 0.0;
  double worst_accuracy = 0.0;

  bool operator==(const TopkRow&) const = default;
};

/// Share of cases whose reference ranks within k under each tie scenario.
/// Throws EmptyInput for no results and InvalidArgument for mixed metrics
/// or k = 0.
std::vector<TopkRow> topk_table(std::span<const RankingResult> results, std::span<const std::size_t> ks);

struct OverlapStats {
  std::size_t n = 0;
  double mean_fraction = 0.0;  // routes without n-grams count as 0
  double coverage = 0.0;       // share of routes with at least one n-gram
  double avg_length = 0.0;
  std::size_t routes = 0;
};

/// Order-independent accumulation of overlap statistics. Per-route results
/// are tallied as exact (recorded, total) pairs, so the final statistics do
/// not depend on insertion order or on how work was split before `merge`.
class OverlapAccumulator {
 public:
  explicit OverlapAccumulator(const NgramDatabase& db) : db_(&db) {}

  void add(const RouteTree& route);
  void merge(const OverlapAccumulator& other);
  OverlapStats stats() const;

 private:
  const NgramDatabase* db_;
  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> tally_;
  std::uint64_t routes_ = 0;
  std::uint64_t total_length_ = 0;
};

/// Throws ArityMismatch if `n` differs from `db.n()`.
OverlapStats aggregate_overlap(std::span<const RouteTree> corpus, const NgramDatabase& db, std::size_t n);

struct MinedNgram {
  std::string key;
  std::uint64_t count = 0;

  std::vector<std::string> tokens() const { return split_key(key); }
  bool operator==(const MinedNgram&) const = default;
};

struct NgramMining {
  std::vector<MinedNgram> positive;
  std::vector<MinedNgram> negative;
};

/// Positive: the k most frequent known n-grams. Negative: the k most
/// frequent generated n-grams absent from `known`. Ties break by key order.
NgramMining mine_bigram_diff(const NgramDatabase& known, const NgramDatabase& generated, std::size_t k);

// Output schemas.
std::string ranking_csv_header();
void write_ranking_csv_row(std::ostream& out, const RankingResult& result);
std::string overlap_csv_header();
void write_overlap_csv_row(std::ostream& out, const OverlapStats& stats);

}  // namespace retrobleu
