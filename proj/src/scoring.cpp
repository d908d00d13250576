#include "retrobleu/scoring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "json.hpp"

namespace retrobleu {

void ScoreConfig::validate() const {
  if (length_pivot < 1) throw Error(ErrorCode::InvalidArgument, "L must be >= 1");
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "n must be >= 2");
  if (!(yield > 0.0 && yield <= 1.0)) throw Error(ErrorCode::InvalidArgument, "yield must be in (0, 1]");
  if (!(prob_floor > 0.0 && prob_floor < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "probability floor must be in (0, 1)");
  }
  if (!std::isfinite(epsilon)) throw Error(ErrorCode::InvalidArgument, "epsilon must be finite");
  if (radius && (*radius < 0 || *radius > 2)) {
    throw Error(ErrorCode::InvalidArgument, "template radius must be in 0..2");
  }
}

Overlap ngram_fraction(const RouteTree& route, const NgramDatabase& db) {
  const TokenKind kind = db.kind();
  if (kind == TokenKind::Template && db.radius()) {
    for (const auto& rxn : route.reactions()) {
      if (rxn.data.template_radius && *rxn.data.template_radius != *db.radius()) {
        throw Error(ErrorCode::MixedRadius,
                    "route '" + route.route_id() + "' has radius " +
                        std::to_string(*rxn.data.template_radius) + " templates, database radius is " +
                        std::to_string(*db.radius()));
      }
    }
  }
  Overlap out;
  std::string key;
  for_each_chain(route, db.n(), [&](std::span<const ReactionId> chain) {
    key.clear();
    for (ReactionId id : chain) append_key_token(key, reaction_token(route, id, kind));
    ++out.total;
    if (db.contains_key(key)) ++out.recorded;
  });
  if (out.total > 0) out.fraction = static_cast<double>(out.recorded) / static_cast<double>(out.total);
  return out;
}

double retro_bleu_value(std::size_t length, double fraction, int length_pivot) {
  const double pivot = static_cast<double>(length_pivot);
  const double len = std::max(pivot, static_cast<double>(length));
  return std::exp(pivot / len) + std::exp(fraction);
}

void check_config_matches(const ScoreConfig& cfg, const NgramDatabase& db) {
  if (cfg.n != db.n()) {
    throw Error(ErrorCode::ArityMismatch, "configured n=" + std::to_string(cfg.n) +
                                              " but database holds " + std::to_string(db.n()) +
                                              "-grams");
  }
  if (cfg.kind != db.kind()) {
    throw Error(ErrorCode::KindMismatch, "configured kind " + std::string(to_string(cfg.kind)) +
                                             " but database kind is " +
                                             std::string(to_string(db.kind())));
  }
  if (cfg.kind == TokenKind::Template && cfg.radius && db.radius() && *cfg.radius != *db.radius()) {
    throw Error(ErrorCode::MixedRadius, "configured radius " + std::to_string(*cfg.radius) +
                                            " but database radius is " + std::to_string(*db.radius()));
  }
}

double retro_bleu(const RouteTree& route, const NgramDatabase& db, const ScoreConfig& cfg) {
  check_config_matches(cfg, db);
  return retro_bleu_value(route.length(), ngram_fraction(route, db).fraction, cfg.length_pivot);
}

double badowski_cost(const RouteTree& route, const ScoreConfig& cfg) {
  // Reactions are in pre-order: every child reaction has a larger id.
  const auto reactions = route.reactions();
  std::vector<double> cost(reactions.size());
  for (std::size_t i = reactions.size(); i-- > 0;) {
    double c = cfg.epsilon;
    route.for_each_successor(ReactionId{static_cast<std::uint32_t>(i)},
                             [&](ReactionId child) { c += cost[child.value] / cfg.yield; });
    cost[i] = c;
  }
  return cost.front();
}

double cumulative_log_prob(const RouteTree& route, const ScoreConfig& cfg) {
  std::vector<double> logs;
  logs.reserve(route.length());
  for (const auto& rxn : route.reactions()) {
    const double p = rxn.data.probability.value_or(cfg.prob_floor);
    if (!(p > 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::ProbOutOfRange, "reaction probability " + format_real(p) + " in route '" +
                                                 route.route_id() + "' is outside (0, 1]");
    }
    logs.push_back(std::log(p));
  }
  // Summing in sorted order makes the result depend only on the multiset.
  std::sort(logs.begin(), logs.end());
  double sum = 0.0;
  for (double v : logs) sum += v;
  return sum;
}

std::size_t length_score(const RouteTree& route) { return route.length(); }

double bigram_ratio_score(const RouteTree& route, const NgramDatabase& db) {
  if (db.n() != 2) {
    throw Error(ErrorCode::ArityMismatch,
                "bigram ratio needs a bigram database, got n=" + std::to_string(db.n()));
  }
  return ngram_fraction(route, db).fraction;
}

ScoreReport score_route(const RouteTree& route, const NgramDatabase& db, const ScoreConfig& cfg) {
  return score_route(route, db, db, cfg);
}

ScoreReport score_route(const RouteTree& route, const NgramDatabase& db,
                        const NgramDatabase& bigram_db, const ScoreConfig& cfg) {
  check_config_matches(cfg, db);
  ScoreReport report;
  report.route_id = route.route_id();
  const Overlap overlap = ngram_fraction(route, db);
  report.f_n = overlap.fraction;
  report.n_recorded = overlap.recorded;
  report.n_total = overlap.total;
  report.length = route.length();
  report.retro_bleu = retro_bleu_value(report.length, overlap.fraction, cfg.length_pivot);
  report.badowski = badowski_cost(route, cfg);
  report.cum_log_prob = cumulative_log_prob(route, cfg);
  report.bigram_ratio = &bigram_db == &db && db.n() == 2 ? overlap.fraction
                                                         : bigram_ratio_score(route, bigram_db);
  return report;
}

std::string format_real(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string score_csv_header() {
  return "route_id,retro_bleu,f_n,n_recorded,n_total,badowski,cum_log_prob,length,bigram_ratio";
}

void write_score_csv_row(std::ostream& out, const ScoreReport& r) {
  out << csv_escape(r.route_id) << ',' << format_real(r.retro_bleu) << ',' << format_real(r.f_n) << ','
      << r.n_recorded << ',' << r.n_total << ',' << format_real(r.badowski) << ','
      << format_real(r.cum_log_prob) << ',' << r.length << ',' << format_real(r.bigram_ratio) << '\n';
}

std::string score_report_json(const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["route_id"] = r.route_id;
  j["retro_bleu"] = r.retro_bleu;
  j["f_n"] = r.f_n;
  j["n_recorded"] = r.n_recorded;
  j["n_total"] = r.n_total;
  j["badowski"] = r.badowski;
  j["cum_log_prob"] = r.cum_log_prob;
  j["length"] = r.length;
  j["bigram_ratio"] = r.bigram_ratio;
  return j.dump();
}

}  // namespace retrobleu
