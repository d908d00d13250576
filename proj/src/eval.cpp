#include "retrobleu/eval.hpp"

#include <algorithm>

namespace retrobleu {

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::RetroBleu: return "retro_bleu";
    case Metric::Badowski: return "badowski";
    case Metric::CumLogProb: return "cum_log_prob";
    case Metric::Length: return "length";
    case Metric::BigramRatio: return "bigram_ratio";
  }
  return "unknown";
}

std::optional<Metric> parse_metric(std::string_view text) {
  for (Metric m : kAllMetrics) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

double metric_value(const ScoreReport& report, Metric metric) {
  switch (metric) {
    case Metric::RetroBleu: return report.retro_bleu;
    case Metric::Badowski: return report.badowski;
    case Metric::CumLogProb: return report.cum_log_prob;
    case Metric::Length: return static_cast<double>(report.length);
    case Metric::BigramRatio: return report.bigram_ratio;
  }
  return 0.0;
}

Ranks rank_among(double reference, std::span<const double> candidates, Direction dir) {
  std::size_t better = 0;
  std::size_t worse = 0;
  for (double c : candidates) {
    const bool c_better = dir == Direction::HigherIsBetter ? c > reference : c < reference;
    const bool c_worse = dir == Direction::HigherIsBetter ? c < reference : c > reference;
    better += c_better;
    worse += c_worse;
  }
  Ranks r;
  r.pool_size = candidates.size() + 1;
  r.best = 1 + better;
  r.worst = r.pool_size - worse;
  return r;
}

RouteScorer::RouteScorer(const NgramDatabase& db, ScoreConfig cfg)
    : db_(&db), bigram_db_(db.n() == 2 ? &db : nullptr), cfg_(std::move(cfg)) {
  cfg_.validate();
  check_config_matches(cfg_, db);
}

RouteScorer::RouteScorer(const NgramDatabase& db, const NgramDatabase& bigram_db, ScoreConfig cfg)
    : db_(&db), bigram_db_(&bigram_db), cfg_(std::move(cfg)) {
  cfg_.validate();
  check_config_matches(cfg_, db);
  if (bigram_db.n() != 2) throw Error(ErrorCode::ArityMismatch, "bigram database must have n=2");
  if (bigram_db.kind() != db.kind()) {
    throw Error(ErrorCode::KindMismatch, "bigram database kind differs from the main database");
  }
}

const NgramDatabase& RouteScorer::bigram_db() const {
  if (!bigram_db_) {
    throw Error(ErrorCode::ArityMismatch, "bigram ratio needs a bigram database, main database has n=" +
                                              std::to_string(db_->n()));
  }
  return *bigram_db_;
}

ScoreReport RouteScorer::score(const RouteTree& route) const {
  return score_route(route, *db_, bigram_db(), cfg_);
}

double RouteScorer::value(const RouteTree& route, Metric metric) const {
  switch (metric) {
    case Metric::RetroBleu: return retro_bleu(route, *db_, cfg_);
    case Metric::Badowski: return badowski_cost(route, cfg_);
    case Metric::CumLogProb: return cumulative_log_prob(route, cfg_);
    case Metric::Length: return static_cast<double>(length_score(route));
    case Metric::BigramRatio: return bigram_ratio_score(route, bigram_db());
  }
  return 0.0;
}

std::vector<RankingResult> rank_case(const TargetCase& tc, std::span<const Metric> metrics,
                                     const RouteScorer& scorer) {
  std::vector<const RouteTree*> pool;
  pool.reserve(tc.candidates.size());
  for (const auto& c : tc.candidates) {
    if (!same_route(c, tc.reference)) pool.push_back(&c);
  }

  std::vector<RankingResult> out;
  std::vector<double> values(pool.size());
  for (Metric m : metrics) {
    for (std::size_t i = 0; i < pool.size(); ++i) values[i] = scorer.value(*pool[i], m);
    const Ranks ranks = rank_among(scorer.value(tc.reference, m), values, direction(m));
    out.push_back(RankingResult{tc.target_id, m, ranks.best, ranks.worst, ranks.pool_size});
  }
  return out;
}

RankingResult rank_case(const TargetCase& tc, Metric metric, const NgramDatabase& db,
                        const ScoreConfig& cfg) {
  const Metric metrics[] = {metric};
  return rank_case(tc, metrics, RouteScorer(db, cfg)).front();
}

std::vector<TopkRow> topk_table(std::span<const RankingResult> results, std::span<const std::size_t> ks) {
  if (results.empty()) throw Error(ErrorCode::EmptyInput, "no ranking results");
  const Metric metric = results.front().metric;
  for (const auto& r : results) {
    if (r.metric != metric) throw Error(ErrorCode::InvalidArgument, "ranking results mix metrics");
  }
  std::vector<TopkRow> table;
  table.reserve(ks.size());
  const double total = static_cast<double>(results.size());
  for (std::size_t k : ks) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    std::size_t best = 0;
    std::size_t worst = 0;
    for (const auto& r : results) {
      best += r.best_rank <= k;
      worst += r.worst_rank <= k;
    }
    table.push_back(TopkRow{k, static_cast<double>(best) / total, static_cast<double>(worst) / total});
  }
  return table;
}

void OverlapAccumulator::add(const RouteTree& route) {
  const Overlap o = ngram_fraction(route, *db_);
  ++tally_[{o.recorded, o.total}];
  ++routes_;
  total_length_ += route.length();
}

void OverlapAccumulator::merge(const OverlapAccumulator& other) {
  for (const auto& [key, count] : other.tally_) tally_[key] += count;
  routes_ += other.routes_;
  total_length_ += other.total_length_;
}

OverlapStats OverlapAccumulator::stats() const {
  OverlapStats s;
  s.n = db_->n();
  s.routes = routes_;
  if (routes_ == 0) return s;
  double fraction_sum = 0.0;
  std::uint64_t covered = 0;
  for (const auto& [key, count] : tally_) {
    const auto [recorded, total] = key;
    if (total == 0) continue;
    covered += count;
    fraction_sum += static_cast<double>(count) * static_cast<double>(recorded) / static_cast<double>(total);
  }
  const double n_routes = static_cast<double>(routes_);
  s.mean_fraction = fraction_sum / n_routes;
  s.coverage = static_cast<double>(covered) / n_routes;
  s.avg_length = static_cast<double>(total_length_) / n_routes;
  return s;
}

OverlapStats aggregate_overlap(std::span<const RouteTree> corpus, const NgramDatabase& db, std::size_t n) {
  if (n != db.n()) {
    throw Error(ErrorCode::ArityMismatch,
                "requested n=" + std::to_string(n) + " but database holds " + std::to_string(db.n()) + "-grams");
  }
  OverlapAccumulator acc(db);
  for (const auto& r : corpus) acc.add(r);
  return acc.stats();
}

namespace {

std::vector<MinedNgram> top_k(std::vector<MinedNgram> items, std::size_t k) {
  auto by_count = [](const MinedNgram& a, const MinedNgram& b) {
    if (a.count != b.count) return a.count > b.count;
    return key_less(a.key, b.key);
  };
  if (items.size() > k) {
    std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(k), items.end(), by_count);
    items.resize(k);
  } else {
    std::sort(items.begin(), items.end(), by_count);
  }
  return items;
}

}  // namespace

NgramMining mine_bigram_diff(const NgramDatabase& known, const NgramDatabase& generated, std::size_t k) {
  require_compatible(known, generated);
  std::vector<MinedNgram> positive;
  positive.reserve(known.size());
  for (const auto& [key, count] : known.entries()) positive.push_back({key, count});
  std::vector<MinedNgram> negative;
  for (const auto& [key, count] : generated.entries()) {
    if (!known.contains_key(key)) negative.push_back({key, count});
  }
  return NgramMining{top_k(std::move(positive), k), top_k(std::move(negative), k)};
}

std::string ranking_csv_header() { return "target_id,metric,best_rank,worst_rank,pool_size"; }

void write_ranking_csv_row(std::ostream& out, const RankingResult& r) {
  out << csv_escape(r.target_id) << ',' << to_string(r.metric) << ',' << r.best_rank << ','
      << r.worst_rank << ',' << r.pool_size << '\n';
}

std::string overlap_csv_header() { return "n,routes,mean_fraction,coverage,avg_length"; }

void write_overlap_csv_row(std::ostream& out, const OverlapStats& s) {
  out << s.n << ',' << s.routes << ',' << format_real(s.mean_fraction) << ',' << format_real(s.coverage)
      << ',' << format_real(s.avg_length) << '\n';
}

}  // namespace retrobleu
