#include <cmath>
#include <random>

#include "doctest.h"
#include "retrobleu/route_json.hpp"
#include "retrobleu/scoring.hpp"
#include "support/oracles.hpp"
#include "support/random_routes.hpp"

using namespace retrobleu;
using namespace retrobleu::testing;

namespace {

const double kE = std::exp(1.0);

RouteTree fixture(const char* name) {
  return load_route_file(std::string(RETROBLEU_FIXTURES) + "/" + name).front();
}

NgramDatabase fixture_db() { return load_db(std::string(RETROBLEU_FIXTURES) + "/known.ngdb"); }

NgramDatabase db_of(std::initializer_list<const char*> keys, std::size_t n = 2) {
  NgramDatabase db(n, TokenKind::Template, 1);
  for (const char* k : keys) db.add_key(k);
  return db;
}

RouteTree with_probabilities(const std::vector<std::optional<double>>& probs) {
  RouteBuilder b("P");
  MoleculeId product = b.root();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    ReactionData d;
    d.template_smarts = "T" + std::to_string(i);
    d.probability = probs[i];
    const auto rid = b.add_reaction(product, d);
    product = b.add_reactant(rid, "M" + std::to_string(i));
  }
  return std::move(b).build();
}

RouteTree convergent_route() {
  RouteBuilder b("P");
  const auto root = b.add_reaction(b.root(), ReactionData{.template_smarts = "A"});
  b.add_reactant(b.add_reaction(b.add_reactant(root, "L"), ReactionData{.template_smarts = "B"}), "L1");
  b.add_reactant(b.add_reaction(b.add_reactant(root, "R"), ReactionData{.template_smarts = "C"}), "R1");
  return std::move(b).build();
}

}  // namespace

TEST_CASE("default configuration") {
  const ScoreConfig cfg;
  CHECK(cfg.length_pivot == 3);
  CHECK(cfg.n == 2);
  CHECK(cfg.kind == TokenKind::Template);
  CHECK(cfg.radius == 1);
  CHECK(cfg.epsilon == 1.0);
  CHECK(cfg.yield == 0.8);
  CHECK(cfg.prob_floor == 1e-10);
  CHECK_NOTHROW(cfg.validate());
  ScoreConfig bad;
  bad.yield = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = ScoreConfig{};
  bad.length_pivot = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = ScoreConfig{};
  bad.prob_floor = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("n-gram fraction") {
  const RouteTree r = linear_route({"A", "B", "C", "D", "E"});
  SUBCASE("all recorded") {
    const Overlap o = ngram_fraction(r, db_of({"A\tB", "B\tC", "C\tD", "D\tE"}));
    CHECK(o.fraction == 1.0);
    CHECK(o.recorded == 4);
    CHECK(o.total == 4);
  }
  SUBCASE("half recorded") {
    const Overlap o = ngram_fraction(r, db_of({"A\tB", "D\tE", "E\tA"}));
    CHECK(o.fraction == 0.5);
    CHECK(o.recorded == 2);
  }
  SUBCASE("shorter than n") {
    const Overlap o = ngram_fraction(linear_route({"A"}), db_of({"A\tB"}));
    CHECK(o.fraction == 0.0);
    CHECK(o.recorded == 0);
    CHECK(o.total == 0);
  }
}

TEST_CASE("Retro-BLEU formula") {
  CHECK(retro_bleu_value(5, 1.0, 3) == doctest::Approx(std::exp(0.6) + kE));
  CHECK(retro_bleu_value(5, 1.0, 3) == doctest::Approx(4.5404).epsilon(1e-4));
  CHECK(retro_bleu_value(2, 0.0, 3) == doctest::Approx(kE + 1.0));
  CHECK(retro_bleu_value(3, 1.0, 3) == doctest::Approx(2 * kE));
  CHECK(retro_bleu_value(1, 1.0, 3) == 2 * kE);
  CHECK(retro_bleu_value(4, 1.0, 3) == doctest::Approx(std::exp(0.75) + kE));
  CHECK(retro_bleu_value(4, 1.0, 3) == doctest::Approx(4.8353).epsilon(1e-4));
}

TEST_CASE("Retro-BLEU on the fixture routes") {
  const NgramDatabase db = fixture_db();
  const ScoreConfig cfg;
  CHECK(retro_bleu(fixture("convergent_patent.json"), db, cfg) == doctest::Approx(4.5404).epsilon(1e-5));
  CHECK(retro_bleu(fixture("short_generated.json"), db, cfg) == doctest::Approx(3.7183).epsilon(1e-5));
  CHECK(retro_bleu(fixture("linear_patent.json"), db, cfg) == doctest::Approx(4.8353).epsilon(1e-5));
  CHECK(retro_bleu(fixture("branched_generated.json"), db, cfg) == doctest::Approx(5.4366).epsilon(1e-5));
}

TEST_CASE("configuration must describe the database") {
  const NgramDatabase db = fixture_db();
  ScoreConfig cfg;
  cfg.n = 3;
  CHECK_THROWS_AS(retro_bleu(linear_route({"A", "B"}), db, cfg), Error);
  cfg = ScoreConfig{};
  cfg.kind = TokenKind::Reaction;
  CHECK_THROWS_AS(retro_bleu(linear_route({"A", "B"}), db, cfg), Error);
  cfg = ScoreConfig{};
  cfg.radius = 2;
  CHECK_THROWS_AS(retro_bleu(linear_route({"A", "B"}), db, cfg), Error);
}

TEST_CASE("routes with another template radius are rejected") {
  RouteBuilder b("P");
  ReactionData d{.template_smarts = "A", .template_radius = 2};
  const auto root = b.add_reaction(b.root(), d);
  d.template_smarts = "B";
  b.add_reactant(b.add_reaction(b.add_reactant(root, "M"), d), "x");
  try {
    (void)ngram_fraction(std::move(b).build(), fixture_db());
    FAIL("expected MixedRadius");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MixedRadius);
  }
}

TEST_CASE("Badowski cost") {
  const ScoreConfig cfg;
  CHECK(badowski_cost(linear_route({"A"}), cfg) == 1.0);
  CHECK(badowski_cost(linear_route({"A", "B"}), cfg) == doctest::Approx(2.25));
  CHECK(badowski_cost(convergent_route(), cfg) == 3.5);
  for (int k = 1; k <= 12; ++k) {
    std::vector<std::string> t(static_cast<std::size_t>(k), "T");
    const double cost = badowski_cost(linear_route(t), cfg);
    CHECK(std::abs(cost - badowski_closed_form(k, 0.8)) <= 1e-9 * badowski_closed_form(k, 0.8));
  }
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const RouteTree r = random_route(rng, {.max_reactions = 12});
    CHECK(badowski_cost(r, cfg) ==
          doctest::Approx(oracle_badowski(r, r.root_reaction(), cfg.epsilon, cfg.yield)).epsilon(1e-12));
  }
}

TEST_CASE("cumulative log probability") {
  const ScoreConfig cfg;
  CHECK(cumulative_log_prob(with_probabilities({1.0}), cfg) == 0.0);
  CHECK(cumulative_log_prob(with_probabilities({0.5, 0.5}), cfg) == doctest::Approx(-1.38629).epsilon(1e-5));
  CHECK(cumulative_log_prob(with_probabilities({std::nullopt}), cfg) ==
        doctest::Approx(-23.0259).epsilon(1e-5));
  for (double bad : {0.0, -0.1, 1.5, std::nan("")}) {
    try {
      (void)cumulative_log_prob(with_probabilities({0.5, bad}), cfg);
      FAIL("expected ProbOutOfRange");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ProbOutOfRange);
    }
  }
}

TEST_CASE("cumulative log probability depends only on the multiset") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(1e-6, 1.0);
  const ScoreConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::optional<double>> probs(1 + trial % 9);
    for (auto& p : probs) p = unit(rng);
    const double base = cumulative_log_prob(with_probabilities(probs), cfg);
    std::shuffle(probs.begin(), probs.end(), rng);
    CHECK(cumulative_log_prob(with_probabilities(probs), cfg) == base);
  }
}

TEST_CASE("length and bigram ratio") {
  CHECK(length_score(linear_route({"A"})) == 1);
  CHECK(length_score(fixture("convergent_patent.json")) == 5);
  CHECK(length_score(fixture("short_generated.json")) == 2);

  const RouteTree r = linear_route({"A", "B", "C"});
  CHECK(bigram_ratio_score(r, db_of({"A\tB", "B\tC"})) == 1.0);
  CHECK(bigram_ratio_score(r, db_of({"C\tA"})) == 0.0);
  try {
    (void)bigram_ratio_score(r, db_of({"A\tB\tC"}, 3));
    FAIL("expected ArityMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ArityMismatch);
  }
}

TEST_CASE("bigram ratio delegates to the n-gram fraction") {
  std::mt19937_64 rng(19);
  const NgramDatabase db = [&] {
    NgramDatabase d(2, TokenKind::Template, 1);
    std::uniform_int_distribution<int> tok(0, 5);
    for (int i = 0; i < 15; ++i) d.add_key(token_name("T", tok(rng)) + "\t" + token_name("T", tok(rng)));
    return d;
  }();
  for (int i = 0; i < 1000; ++i) {
    const RouteTree r = random_route(rng);
    CHECK(bigram_ratio_score(r, db) == ngram_fraction(r, db).fraction);
  }
}

TEST_CASE("score_route bundles the metrics") {
  const ScoreConfig cfg;
  SUBCASE("convergent patent route") {
    const ScoreReport rep = score_route(fixture("convergent_patent.json"), fixture_db(), cfg);
    CHECK(rep.route_id == "convergent_patent");
    CHECK(rep.retro_bleu == doctest::Approx(4.5404).epsilon(1e-5));
    CHECK(rep.length == 5);
    CHECK(rep.bigram_ratio == 1.0);
    CHECK(rep.n_recorded == 4);
    CHECK(rep.n_total == 4);
    CHECK(rep.cum_log_prob == doctest::Approx(5 * std::log(1e-10)));
  }
  SUBCASE("minimal route against an empty database") {
    const RouteTree r = load_route_file(std::string(RETROBLEU_FIXTURES) + "/minimal.json").front();
    const ScoreReport rep = score_route(r, NgramDatabase(2, TokenKind::Template, 1), cfg);
    CHECK(rep.f_n == 0.0);
    CHECK(rep.retro_bleu == doctest::Approx(kE + 1.0));
    CHECK(rep.badowski == 1.0);
    CHECK(rep.length == 1);
    CHECK(rep.cum_log_prob == doctest::Approx(std::log(0.9)));
  }
  SUBCASE("random routes match the individual operations") {
    std::mt19937_64 rng(23);
    NgramDatabase db(2, TokenKind::Template, 1);
    db.add_key("T0\tT1");
    db.add_key("T2\tT2");
    for (int i = 0; i < 300; ++i) {
      const RouteTree r = random_route(rng);
      const ScoreReport rep = score_route(r, db, cfg);
      const Overlap o = ngram_fraction(r, db);
      CHECK(rep.retro_bleu == retro_bleu(r, db, cfg));
      CHECK(rep.f_n == o.fraction);
      CHECK(rep.n_recorded == o.recorded);
      CHECK(rep.n_total == o.total);
      CHECK(rep.badowski == badowski_cost(r, cfg));
      CHECK(rep.cum_log_prob == cumulative_log_prob(r, cfg));
      CHECK(rep.length == length_score(r));
      CHECK(rep.bigram_ratio == bigram_ratio_score(r, db));
      CHECK(score_route(r, db, cfg) == rep);
    }
  }
  SUBCASE("higher-order database needs a separate bigram database") {
    const NgramDatabase tri = db_of({"A\tB\tC"}, 3);
    ScoreConfig c3;
    c3.n = 3;
    const RouteTree r = linear_route({"A", "B", "C"});
    CHECK_THROWS_AS((void)score_route(r, tri, c3), Error);
    const ScoreReport rep = score_route(r, tri, db_of({"A\tB"}), c3);
    CHECK(rep.f_n == 1.0);
    CHECK(rep.bigram_ratio == 0.5);
  }
}

TEST_CASE("Retro-BLEU bounds and length monotonicity") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double f = unit(rng);
    const int pivot = 1 + i % 6;
    double previous = retro_bleu_value(1, f, pivot);
    for (std::size_t len = 1; len <= 30; ++len) {
      const double v = retro_bleu_value(len, f, pivot);
      CHECK(v > 1.0);
      CHECK(v <= 2 * kE);
      if (len > static_cast<std::size_t>(pivot)) {
        CHECK(v < previous);
      } else {
        CHECK(v == previous);
      }
      previous = v;
    }
  }
  CHECK(retro_bleu_value(3, 1.0, 3) == 2 * kE);
  CHECK(retro_bleu_value(4, 1.0, 3) < 2 * kE);
  CHECK(retro_bleu_value(3, 0.999, 3) < 2 * kE);
}

TEST_CASE("report serialisation") {
  ScoreReport r;
  r.route_id = "a,b";
  r.retro_bleu = 4.5;
  r.f_n = 0.25;
  r.n_recorded = 1;
  r.n_total = 4;
  r.badowski = 2.25;
  r.cum_log_prob = -1.5;
  r.length = 2;
  r.bigram_ratio = 0.25;
  std::ostringstream out;
  write_score_csv_row(out, r);
  CHECK(out.str() == "\"a,b\",4.5,0.25,1,4,2.25,-1.5,2,0.25\n");
  CHECK(score_csv_header() == "route_id,retro_bleu,f_n,n_recorded,n_total,badowski,cum_log_prob,length,bigram_ratio");
  CHECK(score_report_json(r) ==
        R"({"route_id":"a,b","retro_bleu":4.5,"f_n":0.25,"n_recorded":1,"n_total":4,"badowski":2.25,"cum_log_prob":-1.5,"length":2,"bigram_ratio":0.25})");
  CHECK(format_real(0.1) == "0.1");
  CHECK(std::stod(format_real(std::exp(1.0))) == std::exp(1.0));
}
