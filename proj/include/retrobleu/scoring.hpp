#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>

#include "retrobleu/ngram_db.hpp"
#include "retrobleu/route.hpp"

namespace retrobleu {

struct ScoreConfig {
  int length_pivot = 3;  // routes longer than this are penalised
  std::size_t n = 2;
  TokenKind kind = TokenKind::Template;
  std::optional<int> radius = 1;
  double epsilon = 1.0;      // fixed cost per reaction
  double yield = 0.8;        // assumed yield of every reaction
  double prob_floor = 1e-10; // probability used when a reaction has none

  /// Throws InvalidArgument when a parameter is out of range.
  void validate() const;
};

struct Overlap {
  double fraction = 0.0;
  std::size_t recorded = 0;
  std::size_t total = 0;
};

struct ScoreReport {
  std::string route_id;
  double retro_bleu = 0.0;
  double f_n = 0.0;
  std::size_t n_recorded = 0;
  std::size_t n_total = 0;
  double badowski = 0.0;
  double cum_log_prob = 0.0;
  std::size_t length = 0;
  double bigram_ratio = 0.0;

  bool operator==(const ScoreReport&) const = default;
};

/// Share of the route's n-reaction chains present in `db`; 0 when the route
/// has no chains. Throws MissingToken, or MixedRadius when a reaction
/// declares a template radius other than the database's.
Overlap ngram_fraction(const RouteTree& route, const NgramDatabase& db);

/// exp(L / max(L, length)) + exp(f)
double retro_bleu_value(std::size_t length, double fraction, int length_pivot);

/// Throws ArityMismatch / KindMismatch / MixedRadius if `cfg` does not
/// describe `db`.
void check_config_matches(const ScoreConfig& cfg, const NgramDatabase& db);

double retro_bleu(const RouteTree& route, const NgramDatabase& db, const ScoreConfig& cfg);

/// Cost of the root reaction, where cost(x) = epsilon + sum over the
/// reactions making x's reactants of cost(child) / yield. Lower is better.
double badowski_cost(const RouteTree& route, const ScoreConfig& cfg);

/// Sum of ln(p) over reactions, missing p replaced by `prob_floor`. Throws
/// ProbOutOfRange for p outside (0, 1].
double cumulative_log_prob(const RouteTree& route, const ScoreConfig& cfg);

std::size_t length_score(const RouteTree& route);

/// f_2 of the route; `db` must hold bigrams.
double bigram_ratio_score(const RouteTree& route, const NgramDatabase& db);

/// All five metrics. The single-database form uses `db` for the bigram
/// ratio too, so `db.n()` must be 2.
ScoreReport score_route(const RouteTree& route, const NgramDatabase& db, const ScoreConfig& cfg);
ScoreReport score_route(const RouteTree& route, const NgramDatabase& db,
                        const NgramDatabase& bigram_db, const ScoreConfig& cfg);

// Report serialisation. Field names match ScoreReport members; reals use the
// shortest round-trip decimal form.
std::string format_real(double value);
std::string csv_escape(std::string_view field);
std::string score_csv_header();
void write_score_csv_row(std::ostream& out, const ScoreReport& report);
std::string score_report_json(const ScoreReport& report);

}  // namespace retrobleu
