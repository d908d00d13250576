#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "retrobleu/eval.hpp"
#include "retrobleu/route_json.hpp"
#include "support/oracles.hpp"
#include "support/random_routes.hpp"

using namespace retrobleu;
using namespace retrobleu::testing;

namespace {

NgramDatabase bigrams(std::initializer_list<const char*> keys) {
  NgramDatabase db(2, TokenKind::Template, 1);
  for (const char* k : keys) db.add_key(k);
  return db;
}

RouteTree fixture(const char* name) {
  return load_route_file(std::string(RETROBLEU_FIXTURES) + "/" + name).front();
}

std::vector<RankingResult> random_results(std::mt19937_64& rng, std::size_t count) {
  std::uniform_int_distribution<std::size_t> pool(1, 20);
  std::vector<RankingResult> out;
  for (std::size_t i = 0; i < count; ++i) {
    RankingResult r;
    r.pool_size = pool(rng);
    r.best_rank = std::uniform_int_distribution<std::size_t>(1, r.pool_size)(rng);
    r.worst_rank = std::uniform_int_distribution<std::size_t>(r.best_rank, r.pool_size)(rng);
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("metric names and directions") {
  for (Metric m : kAllMetrics) CHECK(parse_metric(to_string(m)) == m);
  CHECK_FALSE(parse_metric("bleu").has_value());
  CHECK(direction(Metric::RetroBleu) == Direction::HigherIsBetter);
  CHECK(direction(Metric::CumLogProb) == Direction::HigherIsBetter);
  CHECK(direction(Metric::BigramRatio) == Direction::HigherIsBetter);
  CHECK(direction(Metric::Badowski) == Direction::LowerIsBetter);
  CHECK(direction(Metric::Length) == Direction::LowerIsBetter);
}

TEST_CASE("rank_case on small pools") {
  const ScoreConfig cfg;
  SUBCASE("reference strictly best") {
    const NgramDatabase db = bigrams({"A\tB"});
    const TargetCase tc{"t", linear_route({"A", "B"}), {linear_route({"A", "C"}), linear_route({"C", "D", "E"})}};
    const RankingResult r = rank_case(tc, Metric::RetroBleu, db, cfg);
    CHECK(r.best_rank == 1);
    CHECK(r.worst_rank == 1);
    CHECK(r.pool_size == 3);
    CHECK(r.target_id == "t");
  }
  SUBCASE("reference tied with two candidates") {
    const NgramDatabase db = bigrams({});
    const TargetCase tc{"t",
                        linear_route({"A", "B"}, "ref"),
                        {linear_route({"C", "D"}), linear_route({"E", "F"}), linear_route({"A", "B", "C", "D", "E"})}};
    const RankingResult r = rank_case(tc, Metric::Length, db, cfg);
    CHECK(r.best_rank == 1);
    CHECK(r.worst_rank == 3);
    CHECK(r.pool_size == 4);
  }
  SUBCASE("a candidate identical to the reference is not counted twice") {
    const NgramDatabase db = bigrams({});
    const TargetCase tc{"t", linear_route({"A", "B"}, "ref"), {linear_route({"A", "B"}, "copy"), linear_route({"C"})}};
    const RankingResult r = rank_case(tc, Metric::Length, db, cfg);
    CHECK(r.pool_size == 2);
    CHECK(r.best_rank == 2);
    CHECK(r.worst_rank == 2);
  }
  SUBCASE("patent fixture routes outrank the generated ones") {
    const NgramDatabase db = load_db(std::string(RETROBLEU_FIXTURES) + "/known.ngdb");
    const TargetCase tc{"convergent", fixture("convergent_patent.json"), {fixture("short_generated.json")}};
    const RankingResult bleu = rank_case(tc, Metric::RetroBleu, db, cfg);
    CHECK(bleu.best_rank == 1);
    CHECK(bleu.worst_rank == 1);
    const RankingResult length = rank_case(tc, Metric::Length, db, cfg);
    CHECK(length.best_rank == 2);
  }
}

TEST_CASE("rank_among matches the sort-and-scan oracle") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t size = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    const int levels = std::uniform_int_distribution<int>(1, 6)(rng);
    std::uniform_int_distribution<int> value(0, levels - 1);
    std::vector<double> pool(size);
    for (auto& v : pool) v = value(rng) * 0.5;
    const std::span<const double> candidates(pool.data() + 1, pool.size() - 1);
    for (Direction dir : {Direction::HigherIsBetter, Direction::LowerIsBetter}) {
      const Ranks got = rank_among(pool[0], candidates, dir);
      const OracleRanks want = oracle_rank(pool, dir == Direction::HigherIsBetter);
      CHECK(got.best == want.best);
      CHECK(got.worst == want.worst);
      CHECK(got.pool_size == size);
      CHECK(got.best <= got.worst);
      CHECK(got.worst <= got.pool_size);
    }
  }
}

TEST_CASE("ranks are invariant under strictly increasing transforms") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto transforms = {+[](double x) { return std::exp(3 * x); }, +[](double x) { return x * x * x + 7; },
                           +[](double x) { return std::log1p(x) * 100; }};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> pool(1 + trial % 20);
    for (auto& v : pool) v = std::round(unit(rng) * 5) / 5;
    const Ranks base = rank_among(pool[0], std::span<const double>(pool).subspan(1), Direction::HigherIsBetter);
    for (auto f : transforms) {
      std::vector<double> t(pool.size());
      std::transform(pool.begin(), pool.end(), t.begin(), f);
      const Ranks r = rank_among(t[0], std::span<const double>(t).subspan(1), Direction::HigherIsBetter);
      CHECK(r.best == base.best);
      CHECK(r.worst == base.worst);
    }
  }
}

TEST_CASE("all-distinct scores give equal best and worst ranks") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> pool(1 + trial % 15);
    std::iota(pool.begin(), pool.end(), 0.0);
    std::shuffle(pool.begin(), pool.end(), rng);
    const Ranks r = rank_among(pool[0], std::span<const double>(pool).subspan(1), Direction::LowerIsBetter);
    CHECK(r.best == r.worst);
    CHECK(r.best == static_cast<std::size_t>(pool[0]) + 1);
  }
}

TEST_CASE("top-k table") {
  SUBCASE("single tied result") {
    const std::vector<RankingResult> results{{"t", Metric::RetroBleu, 1, 3, 5}};
    const std::vector<std::size_t> ks{1, 3};
    const auto table = topk_table(results, ks);
    REQUIRE(table.size() == 2);
    CHECK(table[0] == TopkRow{1, 1.0, 0.0});
    CHECK(table[1] == TopkRow{3, 1.0, 1.0});
  }
  SUBCASE("all ranked first") {
    const std::vector<RankingResult> results(7, RankingResult{"t", Metric::Length, 1, 1, 4});
    const std::vector<std::size_t> ks{1, 2, 10};
    for (const auto& row : topk_table(results, ks)) {
      CHECK(row.best_accuracy == 1.0);
      CHECK(row.worst_accuracy == 1.0);
    }
  }
  SUBCASE("errors") {
    const std::vector<std::size_t> ks{1};
    try {
      (void)topk_table({}, ks);
      FAIL("expected EmptyInput");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyInput);
    }
    const std::vector<RankingResult> mixed{{"a", Metric::Length, 1, 1, 1}, {"b", Metric::RetroBleu, 1, 1, 1}};
    CHECK_THROWS_AS((void)topk_table(mixed, ks), Error);
    const std::vector<std::size_t> zero{0};
    CHECK_THROWS_AS((void)topk_table(std::span<const RankingResult>(mixed).first(1), zero), Error);
  }
  SUBCASE("random results against direct counting") {
    std::mt19937_64 rng(53);
    const auto results = random_results(rng, 100);
    std::vector<std::size_t> ks(20);
    std::iota(ks.begin(), ks.end(), std::size_t{1});
    const auto table = topk_table(results, ks);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      std::size_t best = 0, worst = 0;
      for (const auto& r : results) {
        if (r.best_rank <= ks[i]) ++best;
        if (r.worst_rank <= ks[i]) ++worst;
      }
      CHECK(table[i].k == ks[i]);
      CHECK(table[i].best_accuracy == static_cast<double>(best) / 100.0);
      CHECK(table[i].worst_accuracy == static_cast<double>(worst) / 100.0);
      CHECK(table[i].best_accuracy >= table[i].worst_accuracy);
      if (i > 0) {
        CHECK(table[i].best_accuracy >= table[i - 1].best_accuracy);
        CHECK(table[i].worst_accuracy >= table[i - 1].worst_accuracy);
      }
    }
    CHECK(table.back().best_accuracy == 1.0);
    CHECK(table.back().worst_accuracy == 1.0);
  }
}

TEST_CASE("RouteScorer requires a bigram database for bigram_ratio") {
  NgramDatabase tri(3, TokenKind::Template, 1);
  ScoreConfig cfg;
  cfg.n = 3;
  const RouteScorer scorer(tri, cfg);
  CHECK_FALSE(scorer.has_bigram_db());
  const RouteTree r = linear_route({"A", "B", "C"});
  CHECK(scorer.value(r, Metric::Length) == 3.0);
  try {
    (void)scorer.value(r, Metric::BigramRatio);
    FAIL("expected ArityMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ArityMismatch);
  }
  const NgramDatabase bi = bigrams({"A\tB"});
  const RouteScorer both(tri, bi, cfg);
  CHECK(both.value(r, Metric::BigramRatio) == 0.5);
  CHECK(both.score(r).bigram_ratio == 0.5);
  CHECK_THROWS_AS(RouteScorer(bigrams({}), ScoreConfig{.n = 3}), Error);
}

TEST_CASE("rank_case over several metrics agrees with single-metric calls") {
  std::mt19937_64 rng(59);
  NgramDatabase db(2, TokenKind::Template, 1);
  for (int i = 0; i < 12; ++i) db.add_key(token_name("T", i % 6) + "\t" + token_name("T", (i * 5) % 6));
  const ScoreConfig cfg;
  const RouteScorer scorer(db, cfg);
  for (int trial = 0; trial < 100; ++trial) {
    TargetCase tc{"case" + std::to_string(trial), random_route(rng), {}};
    for (int c = 0; c < 1 + trial % 10; ++c) tc.candidates.push_back(random_route(rng));
    const auto all = rank_case(tc, kAllMetrics, scorer);
    REQUIRE(all.size() == kAllMetrics.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(all[i] == rank_case(tc, kAllMetrics[i], db, cfg));
      std::vector<double> pool{scorer.value(tc.reference, kAllMetrics[i])};
      for (const auto& c : tc.candidates) {
        if (!same_route(c, tc.reference)) pool.push_back(scorer.value(c, kAllMetrics[i]));
      }
      const OracleRanks want = oracle_rank(pool, direction(kAllMetrics[i]) == Direction::HigherIsBetter);
      CHECK(all[i].best_rank == want.best);
      CHECK(all[i].worst_rank == want.worst);
    }
  }
}

TEST_CASE("overlap aggregation") {
  SUBCASE("every window recorded") {
    const std::vector<RouteTree> corpus{linear_route({"A", "B", "C"}), linear_route({"B", "C"})};
    const OverlapStats s = aggregate_overlap(corpus, bigrams({"A\tB", "B\tC"}), 2);
    CHECK(s.mean_fraction == 1.0);
    CHECK(s.coverage == 1.0);
    CHECK(s.avg_length == 2.5);
    CHECK(s.routes == 2);
    CHECK(s.n == 2);
  }
  SUBCASE("single-step corpus") {
    const std::vector<RouteTree> corpus{linear_route({"A"}), linear_route({"B"}), linear_route({"C"})};
    const OverlapStats s = aggregate_overlap(corpus, bigrams({"A\tB"}), 2);
    CHECK(s.mean_fraction == 0.0);
    CHECK(s.coverage == 0.0);
    CHECK(s.avg_length == 1.0);
  }
  SUBCASE("empty corpus") {
    const OverlapStats s = aggregate_overlap({}, bigrams({}), 2);
    CHECK(s.routes == 0);
    CHECK(s.mean_fraction == 0.0);
  }
  SUBCASE("order must match the database") {
    CHECK_THROWS_AS((void)aggregate_overlap({}, bigrams({}), 3), Error);
  }
}

TEST_CASE("overlap statistics against a tally oracle") {
  std::mt19937_64 rng(61);
  std::vector<RouteTree> known;
  for (int i = 0; i < 30; ++i) known.push_back(random_route(rng));
  for (std::size_t n : {2u, 3u}) {
    const NgramDatabase db = build_db(known, n, TokenKind::Template, 1);
    const auto tally = oracle_tally(known, n, TokenKind::Template);
    std::vector<RouteTree> corpus;
    for (int i = 0; i < 50; ++i) corpus.push_back(random_route(rng));

    double fraction_sum = 0.0;
    double covered = 0.0;
    double length_sum = 0.0;
    for (const auto& r : corpus) {
      const auto windows = oracle_chains(r, n);
      std::size_t hit = 0;
      for (const auto& w : windows) hit += tally.count(oracle_tokens(r, w, TokenKind::Template));
      if (!windows.empty()) {
        fraction_sum += static_cast<double>(hit) / static_cast<double>(windows.size());
        covered += 1;
      }
      length_sum += static_cast<double>(r.length());
    }
    const OverlapStats s = aggregate_overlap(corpus, db, n);
    CHECK(s.mean_fraction == doctest::Approx(fraction_sum / 50).epsilon(1e-12));
    CHECK(s.coverage == covered / 50);
    CHECK(s.avg_length == length_sum / 50);

    for (int shuffle = 0; shuffle < 5; ++shuffle) {
      std::shuffle(corpus.begin(), corpus.end(), rng);
      const OverlapStats t = aggregate_overlap(corpus, db, n);
      CHECK(t.mean_fraction == s.mean_fraction);
      CHECK(t.coverage == s.coverage);
      CHECK(t.avg_length == s.avg_length);
    }

    OverlapAccumulator left(db), right(db);
    for (std::size_t i = 0; i < corpus.size(); ++i) (i % 3 == 0 ? left : right).add(corpus[i]);
    right.merge(left);
    CHECK(right.stats().mean_fraction == s.mean_fraction);
    CHECK(right.stats().routes == 50);
  }
}

TEST_CASE("bigram mining") {
  SUBCASE("generated subset of known") {
    const NgramDatabase known = bigrams({"A\tB", "A\tB", "B\tC"});
    const NgramDatabase generated = bigrams({"A\tB"});
    const NgramMining m = mine_bigram_diff(known, generated, 5);
    CHECK(m.negative.empty());
    REQUIRE(m.positive.size() == 2);
    CHECK(m.positive[0] == MinedNgram{"A\tB", 2});
    CHECK(m.positive[1] == MinedNgram{"B\tC", 1});
  }
  SUBCASE("empty known database") {
    const NgramDatabase generated = bigrams({"C\tD", "A\tB", "C\tD", "E\tF", "E\tF", "E\tF"});
    const NgramMining m = mine_bigram_diff(bigrams({}), generated, 2);
    CHECK(m.positive.empty());
    REQUIRE(m.negative.size() == 2);
    CHECK(m.negative[0] == MinedNgram{"E\tF", 3});
    CHECK(m.negative[1] == MinedNgram{"C\tD", 2});
    CHECK(m.negative[1].tokens() == std::vector<std::string>{"C", "D"});
  }
  SUBCASE("ties break by key order") {
    const NgramMining m = mine_bigram_diff(bigrams({}), bigrams({"b\tx", "a\ty", "a b\tz"}), 3);
    REQUIRE(m.negative.size() == 3);
    CHECK(m.negative[0].key == "a\ty");
    CHECK(m.negative[1].key == "a b\tz");
    CHECK(m.negative[2].key == "b\tx");
  }
  SUBCASE("incompatible databases") {
    try {
      (void)mine_bigram_diff(bigrams({}), NgramDatabase(2, TokenKind::Reaction), 1);
      FAIL("expected KindMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::KindMismatch);
    }
  }
}

TEST_CASE("bigram mining agrees with a filter-and-sort oracle") {
  std::mt19937_64 rng(67);
  std::uniform_int_distribution<int> tok(0, 7);
  std::uniform_int_distribution<int> size(0, 60);
  for (int trial = 0; trial < 200; ++trial) {
    NgramDatabase known(2, TokenKind::Template, 1), generated(2, TokenKind::Template, 1);
    for (int i = size(rng); i > 0; --i) known.add_key(token_name("T", tok(rng)) + "\t" + token_name("T", tok(rng)));
    for (int i = size(rng); i > 0; --i) generated.add_key(token_name("T", tok(rng)) + "\t" + token_name("T", tok(rng)));
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 12)(rng);

    auto oracle = [k](std::vector<std::pair<std::vector<std::string>, std::uint64_t>> items) {
      std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
      });
      if (items.size() > k) items.resize(k);
      return items;
    };
    std::vector<std::pair<std::vector<std::string>, std::uint64_t>> pos, neg;
    for (const auto& [key, count] : known.entries()) pos.emplace_back(split_key(key), count);
    for (const auto& [key, count] : generated.entries()) {
      bool present = false;
      for (const auto& [kk, kc] : known.entries()) present = present || kk == key;
      if (!present) neg.emplace_back(split_key(key), count);
    }
    const auto want_pos = oracle(pos);
    const auto want_neg = oracle(neg);
    const NgramMining got = mine_bigram_diff(known, generated, k);
    REQUIRE(got.positive.size() == want_pos.size());
    REQUIRE(got.negative.size() == want_neg.size());
    for (std::size_t i = 0; i < want_pos.size(); ++i) {
      CHECK(got.positive[i].tokens() == want_pos[i].first);
      CHECK(got.positive[i].count == want_pos[i].second);
    }
    for (std::size_t i = 0; i < want_neg.size(); ++i) {
      CHECK(got.negative[i].tokens() == want_neg[i].first);
      CHECK(got.negative[i].count == want_neg[i].second);
    }
  }
}

TEST_CASE("result serialisation") {
  std::ostringstream out;
  write_ranking_csv_row(out, RankingResult{"t,1", Metric::Badowski, 2, 4, 7});
  CHECK(out.str() == "\"t,1\",badowski,2,4,7\n");
  CHECK(ranking_csv_header() == "target_id,metric,best_rank,worst_rank,pool_size");
  std::ostringstream o2;
  OverlapStats s;
  s.n = 3;
  s.routes = 4;
  s.mean_fraction = 0.25;
  s.coverage = 0.5;
  s.avg_length = 2.75;
  write_overlap_csv_row(o2, s);
  CHECK(o2.str() == "3,4,0.25,0.5,2.75\n");
}
