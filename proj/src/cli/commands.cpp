#include "cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <thread>
#include <variant>

#include "CLI11.hpp"
#include "cli/config.hpp"
#include "cli/manifest.hpp"
#include "retrobleu/eval.hpp"
#include "retrobleu/route_json.hpp"

namespace retrobleu::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::size_t kScoreChunk = 4096;

void warn(std::ostream& err, const std::string& msg) { err << "retrobleu: warning: " << msg << '\n'; }

unsigned worker_count(unsigned jobs, std::size_t items) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(jobs, items)));
}

/// Calls f(w) for w in [0, workers) on separate threads.
template <class F>
void run_workers(unsigned workers, F&& f) {
  if (workers <= 1) {
    f(0u);
    return;
  }
  std::vector<std::jthread> threads;
  for (unsigned w = 1; w < workers; ++w) threads.emplace_back([&f, w] { f(w); });
  f(0u);
}

/// Calls f(i) for every i in [0, count). Each index is handled exactly once;
/// if any calls throw, the exception of the lowest index is rethrown.
template <class F>
void parallel_for(std::size_t count, unsigned jobs, F&& f) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  run_workers(worker_count(jobs, count), [&](unsigned) {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  });
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Directories expand to their *.json files in name order.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& args) {
  std::vector<fs::path> files;
  for (const auto& a : args) {
    const fs::path p(a);
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") found.push_back(entry.path());
      }
      if (ec) throw Error(ErrorCode::Io, "cannot list " + p.string());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

std::set<std::string> load_patent_list(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::set<std::string> ids;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    ids.insert(line.substr(first, last - first + 1));
  }
  return ids;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(pos, comma - pos);
    pos = comma + 1;
    if (item.empty()) continue;
    if constexpr (std::is_same_v<T, Metric>) {
      const auto m = parse_metric(item);
      if (!m) throw Error(ErrorCode::InvalidArgument, "unknown metric '" + item + "'");
      out.push_back(*m);
    } else {
      std::size_t used = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != item.size() || v == 0) {
        throw Error(ErrorCode::InvalidArgument, std::string("invalid ") + what + " '" + item + "'");
      }
      out.push_back(static_cast<T>(v));
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, std::string("empty ") + what + " list");
  return out;
}

/// Output stream backed by a file, or by `fallback` when no path is given.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : path_(path) {
    if (path.empty()) {
      stream_ = &fallback;
      return;
    }
    const fs::path p(path);
    std::error_code ec;
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    file_.open(p, std::ios::binary | std::ios::trunc);
    if (!file_) throw Error(ErrorCode::Io, "cannot write " + path);
    stream_ = &file_;
  }

  std::ostream& stream() { return *stream_; }
  bool is_file() const { return !path_.empty(); }

  void close() {
    stream_->flush();
    if (!*stream_) throw Error(ErrorCode::Io, "write failed" + (path_.empty() ? std::string() : ": " + path_));
    if (file_.is_open()) file_.close();
  }

 private:
  std::string path_;
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

/// Values for ScoreConfig fields collected from the command line.
struct SettingFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_setting(CLI::App* app, SettingFlags& flags, const std::string& name, const std::string& key,
                 const std::string& help) {
  app->add_option_function<std::string>(
      name, [&flags, key](const std::string& v) { flags.values[key] = v; }, help);
}

void add_config_option(CLI::App* app, SettingFlags& flags) {
  app->add_option("--config", flags.config_file, "key = value settings file (default: $RETROBLEU_CONFIG)");
}

void add_chain_settings(CLI::App* app, SettingFlags& flags) {
  add_setting(app, flags, "--n", "n", "n-gram order");
  add_setting(app, flags, "--kind", "kind", "token kind: template or reaction");
  add_setting(app, flags, "--radius", "radius", "template radius 0-2, or none");
}

void add_score_settings(CLI::App* app, SettingFlags& flags) {
  add_setting(app, flags, "-L,--length-pivot", "L", "length pivot L");
  add_setting(app, flags, "--epsilon", "epsilon", "per-reaction cost for badowski");
  add_setting(app, flags, "--yield", "yield", "assumed yield for badowski");
  add_setting(app, flags, "--prob-floor", "prob_floor", "probability used when a reaction has none");
}

struct Settings {
  ScoreConfig cfg;
  ConfigLayer given;
};

Settings resolve_settings(const SettingFlags& flags) {
  ConfigLayer file;
  if (const auto path = config_path(flags.config_file)) file = load_config_file(*path);
  ConfigLayer cli;
  for (const auto& [key, value] : flags.values) cli.set(key, value);
  Settings s;
  s.given = file.overlaid_with(cli);
  s.given.apply_to(s.cfg);
  return s;
}

/// Fields the user did not set are taken from the database header.
ScoreConfig adopt_db_header(Settings s, const NgramDatabase& db) {
  if (!s.given.n) s.cfg.n = db.n();
  if (!s.given.kind) s.cfg.kind = db.kind();
  if (!s.given.radius) s.cfg.radius = db.radius();
  if (s.cfg.kind == TokenKind::Reaction) s.cfg.radius.reset();
  s.cfg.validate();
  return s.cfg;
}

// ---------------------------------------------------------------- build-db

struct BuildDbArgs {
  std::vector<std::string> routes;
  std::vector<std::string> shards;
  std::string exclude_file;
  std::string out;
  unsigned jobs = 1;
  SettingFlags settings;
};

/// Builds from route files with one builder per worker; files are assigned
/// to workers round-robin so the result and any reported error do not
/// depend on scheduling.
NgramDatabase build_from_files(const std::vector<fs::path>& files, const ScoreConfig& cfg,
                               const std::set<std::string>& excluded, unsigned jobs,
                               std::uint64_t& excluded_routes) {
  const unsigned workers = worker_count(jobs, files.size());
  std::vector<std::optional<DbBuilder>> builders(workers);
  std::vector<std::exception_ptr> errors(files.size());
  run_workers(workers, [&](unsigned w) {
    auto& builder = builders[w].emplace(cfg.n, cfg.kind, cfg.radius, excluded);
    for (std::size_t i = w; i < files.size(); i += workers) {
      try {
        for (const auto& route : load_route_file(files[i])) builder.add_route(route);
      } catch (...) {
        errors[i] = std::current_exception();
        return;
      }
    }
  });
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  excluded_routes = 0;
  std::optional<NgramDatabase> db;
  for (auto& b : builders) {
    excluded_routes += b->excluded_routes();
    db = db ? merge(*db, b->db()) : std::move(*b).finish();
  }
  return std::move(*db);
}

int cmd_build_db(const BuildDbArgs& a, std::ostream& out, std::ostream& err) {
  const Settings settings = resolve_settings(a.settings);
  const ScoreConfig& cfg = settings.cfg;
  const auto files = expand_inputs(a.routes);
  if (files.empty() && a.shards.empty()) {
    throw Error(ErrorCode::InvalidArgument, "build-db needs --routes or --merge inputs");
  }
  std::set<std::string> excluded;
  if (!a.exclude_file.empty()) excluded = load_patent_list(a.exclude_file);

  std::optional<NgramDatabase> db;
  std::uint64_t excluded_routes = 0;
  if (!files.empty() || settings.given.n || settings.given.kind || settings.given.radius) {
    db = build_from_files(files, cfg, excluded, a.jobs, excluded_routes);
  }
  for (const auto& shard : a.shards) {
    NgramDatabase part = load_db(shard);
    db = db ? merge(*db, part) : std::move(part);
  }

  save_db(*db, a.out);

  RunManifest m;
  m.command = "build-db";
  m.config["n"] = db->n();
  m.config["kind"] = std::string(to_string(db->kind()));
  m.config["radius"] = db->radius() ? ordered_json(*db->radius()) : ordered_json(nullptr);
  m.config["excluded_patents"] = std::vector<std::string>(excluded.begin(), excluded.end());
  std::vector<fs::path> hashed = files;
  for (const auto& s : a.shards) hashed.emplace_back(s);
  if (!a.exclude_file.empty()) hashed.emplace_back(a.exclude_file);
  m.inputs = path_strings(hashed);
  m.outputs = {a.out};
  m.corpus_sha256 = fingerprint_files(hashed);
  write_manifest(m, manifest_path_for(a.out));

  out << a.out << ": " << db->size() << " entries, " << db->source_route_count() << " routes, "
      << excluded_routes << " excluded\n";
  if (db->empty()) warn(err, "database is empty");
  return kExitOk;
}

// ------------------------------------------------------------------- score

struct ScoreArgs {
  std::string db;
  std::string bigram_db;
  std::vector<std::string> routes;
  std::string out;
  std::string json;
  bool strict = false;
  unsigned jobs = 1;
  SettingFlags settings;
};

int cmd_score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  const NgramDatabase db = load_db(a.db);
  std::optional<NgramDatabase> bigram_db;
  if (!a.bigram_db.empty()) bigram_db = load_db(a.bigram_db);
  const ScoreConfig cfg = adopt_db_header(resolve_settings(a.settings), db);
  const RouteScorer scorer = bigram_db ? RouteScorer(db, *bigram_db, cfg) : RouteScorer(db, cfg);
  if (!scorer.has_bigram_db()) {
    throw Error(ErrorCode::ArityMismatch, "database holds " + std::to_string(db.n()) +
                                              "-grams; pass --bigram-db for the bigram_ratio column");
  }
  const auto files = expand_inputs(a.routes);

  Output csv(a.out, out);
  std::optional<Output> json;
  if (!a.json.empty()) json.emplace(a.json, out);
  csv.stream() << score_csv_header() << '\n';
  if (json) json->stream() << '[';

  std::size_t scored = 0;
  std::size_t failed = 0;
  using Result = std::variant<ScoreReport, std::string>;
  std::vector<Result> results;
  for (const auto& file : files) {
    std::vector<RouteTree> routes;
    try {
      routes = load_route_file(file);
    } catch (const Error& e) {
      if (a.strict || e.code() == ErrorCode::Io) throw;
      err << "retrobleu: error: " << e.message() << '\n';
      ++failed;
      continue;
    }
    for (std::size_t begin = 0; begin < routes.size(); begin += kScoreChunk) {
      const std::size_t end = std::min(routes.size(), begin + kScoreChunk);
      results.assign(end - begin, Result{});
      parallel_for(end - begin, a.jobs, [&](std::size_t i) {
        try {
          results[i] = scorer.score(routes[begin + i]);
        } catch (const Error& e) {
          if (a.strict) throw Error(e.code(), "route " + routes[begin + i].route_id() + ": " + e.message());
          results[i] = "route " + routes[begin + i].route_id() + ": " + e.message();
        }
      });
      for (const auto& r : results) {
        if (const auto* report = std::get_if<ScoreReport>(&r)) {
          write_score_csv_row(csv.stream(), *report);
          if (json) json->stream() << (scored == 0 ? "\n" : ",\n") << score_report_json(*report);
          ++scored;
        } else {
          err << "retrobleu: error: " << std::get<std::string>(r) << '\n';
          ++failed;
        }
      }
    }
  }
  if (json) {
    json->stream() << (scored == 0 ? "]\n" : "\n]\n");
    json->close();
  }
  csv.close();

  if (csv.is_file()) {
    RunManifest m;
    m.command = "score";
    m.config = config_json(cfg);
    m.config["strict"] = a.strict;
    m.inputs = path_strings(files);
    m.db = a.db;
    if (bigram_db) m.config["bigram_db"] = a.bigram_db;
    m.outputs = {a.out};
    if (json) m.outputs.push_back(a.json);
    m.corpus_sha256 = fingerprint_files(files);
    write_manifest(m, manifest_path_for(a.out));
  }
  err << "retrobleu: scored " << scored << " routes, " << failed << " failed\n";
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string cases;
  std::string db;
  std::string bigram_db;
  std::string metrics;
  std::string ks = "1,3,5,10";
  std::string out_dir;
  unsigned jobs = 1;
  SettingFlags settings;
};

struct CaseSpec {
  std::string target_id;
  fs::path reference;
  std::vector<fs::path> candidates;
};

std::vector<CaseSpec> load_case_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::InvalidField, path.string() + ": expected an array of cases");
  const fs::path base = path.parent_path();
  std::vector<CaseSpec> cases;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& c = doc[i];
    const std::string where = path.string() + ": case " + std::to_string(i) + ": ";
    if (!c.is_object()) throw Error(ErrorCode::InvalidField, where + "expected an object");
    for (const char* key : {"target_id", "reference", "candidates"}) {
      if (!c.contains(key)) throw Error(ErrorCode::MissingField, where + "missing '" + key + "'");
    }
    if (!c["target_id"].is_string() || !c["reference"].is_string() || !c["candidates"].is_array()) {
      throw Error(ErrorCode::InvalidField, where + "wrong field types");
    }
    CaseSpec spec;
    spec.target_id = c["target_id"].get<std::string>();
    spec.reference = base / c["reference"].get<std::string>();
    for (const auto& p : c["candidates"]) {
      if (!p.is_string()) throw Error(ErrorCode::InvalidField, where + "candidate paths must be strings");
      spec.candidates.push_back(base / p.get<std::string>());
    }
    cases.push_back(std::move(spec));
  }
  return cases;
}

ordered_json overlap_json(const OverlapStats& s) {
  ordered_json j;
  j["n"] = s.n;
  j["routes"] = s.routes;
  j["mean_fraction"] = s.mean_fraction;
  j["coverage"] = s.coverage;
  j["avg_length"] = s.avg_length;
  return j;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const NgramDatabase db = load_db(a.db);
  std::optional<NgramDatabase> bigram_db;
  if (!a.bigram_db.empty()) bigram_db = load_db(a.bigram_db);
  const ScoreConfig cfg = adopt_db_header(resolve_settings(a.settings), db);
  const RouteScorer scorer = bigram_db ? RouteScorer(db, *bigram_db, cfg) : RouteScorer(db, cfg);

  std::vector<Metric> metrics;
  if (a.metrics.empty()) {
    for (Metric m : kAllMetrics) {
      if (m != Metric::BigramRatio || scorer.has_bigram_db()) metrics.push_back(m);
    }
  } else {
    metrics = parse_list<Metric>(a.metrics, "metric");
  }
  const auto ks = parse_list<std::size_t>(a.ks, "k");

  const auto specs = load_case_file(a.cases);
  std::vector<bool> usable(specs.size(), true);
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    std::error_code ec;
    if (!fs::exists(specs[i].reference, ec)) {
      warn(err, "case " + specs[i].target_id + ": reference " + specs[i].reference.string() +
                    " not found, skipping");
      usable[i] = false;
    } else if (specs[i].candidates.empty()) {
      warn(err, "case " + specs[i].target_id + ": no candidates, skipping");
      usable[i] = false;
    }
    skipped += !usable[i];
  }

  std::vector<std::vector<RankingResult>> per_case(specs.size());
  std::vector<std::unique_ptr<OverlapAccumulator>> ref_overlap(specs.size());
  std::vector<std::unique_ptr<OverlapAccumulator>> cand_overlap(specs.size());
  parallel_for(specs.size(), a.jobs, [&](std::size_t i) {
    if (!usable[i]) return;
    const CaseSpec& spec = specs[i];
    auto refs = load_route_file(spec.reference);
    if (refs.size() != 1) {
      throw Error(ErrorCode::InvalidArgument,
                  spec.reference.string() + ": reference file must hold exactly one route");
    }
    TargetCase tc{spec.target_id, std::move(refs.front()), {}};
    for (const auto& path : spec.candidates) {
      auto routes = load_route_file(path);
      std::move(routes.begin(), routes.end(), std::back_inserter(tc.candidates));
    }
    try {
      per_case[i] = rank_case(tc, metrics, scorer);
    } catch (const Error& e) {
      throw Error(e.code(), "case " + spec.target_id + ": " + e.message());
    }
    ref_overlap[i] = std::make_unique<OverlapAccumulator>(db);
    ref_overlap[i]->add(tc.reference);
    cand_overlap[i] = std::make_unique<OverlapAccumulator>(db);
    for (const auto& c : tc.candidates) cand_overlap[i]->add(c);
  });

  OverlapAccumulator refs(db), cands(db);
  std::size_t evaluated = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!usable[i]) continue;
    refs.merge(*ref_overlap[i]);
    cands.merge(*cand_overlap[i]);
    ++evaluated;
  }
  if (evaluated == 0) throw Error(ErrorCode::EmptyInput, "no case could be evaluated");

  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + a.out_dir);
  RunManifest m;
  for (std::size_t mi = 0; mi < metrics.size(); ++mi) {
    const std::string name(to_string(metrics[mi]));
    std::vector<RankingResult> results;
    const fs::path csv_path = fs::path(a.out_dir) / ("ranking_" + name + ".csv");
    Output csv(csv_path.string(), out);
    csv.stream() << ranking_csv_header() << '\n';
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (!usable[i]) continue;
      results.push_back(per_case[i][mi]);
      write_ranking_csv_row(csv.stream(), results.back());
    }
    csv.close();

    ordered_json summary;
    summary["metric"] = name;
    summary["direction"] = direction(metrics[mi]) == Direction::HigherIsBetter ? "higher_is_better"
                                                                                : "lower_is_better";
    summary["cases"] = evaluated;
    summary["skipped"] = skipped;
    summary["topk"] = ordered_json::array();
    for (const auto& row : topk_table(results, ks)) {
      summary["topk"].push_back({{"k", row.k}, {"best", row.best_accuracy}, {"worst", row.worst_accuracy}});
    }
    summary["overlap"] = {{"reference", overlap_json(refs.stats())}, {"candidates", overlap_json(cands.stats())}};
    const fs::path json_path = fs::path(a.out_dir) / ("topk_" + name + ".json");
    Output json(json_path.string(), out);
    json.stream() << summary.dump(2) << '\n';
    json.close();
    m.outputs.push_back(csv_path.string());
    m.outputs.push_back(json_path.string());
  }

  std::vector<fs::path> hashed{a.cases};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!usable[i]) continue;
    hashed.push_back(specs[i].reference);
    hashed.insert(hashed.end(), specs[i].candidates.begin(), specs[i].candidates.end());
  }
  m.command = "eval";
  m.config = config_json(cfg);
  m.config["metrics"] = ordered_json::array();
  for (Metric metric : metrics) m.config["metrics"].push_back(std::string(to_string(metric)));
  m.config["ks"] = ks;
  if (bigram_db) m.config["bigram_db"] = a.bigram_db;
  m.inputs = path_strings(hashed);
  m.db = a.db;
  m.corpus_sha256 = fingerprint_files(hashed);
  write_manifest(m, fs::path(a.out_dir) / "manifest.json");

  out << "evaluated " << evaluated << " cases, skipped " << skipped << '\n';
  return kExitOk;
}

// ------------------------------------------------------------ mine-bigrams

struct MineArgs {
  std::string known;
  std::string generated;
  std::size_t top = 20;
  std::string out;
};

int cmd_mine(const MineArgs& a, std::ostream& out, std::ostream&) {
  const NgramDatabase known = load_db(a.known);
  const NgramDatabase generated = load_db(a.generated);
  const NgramMining mined = mine_bigram_diff(known, generated, a.top);

  Output tsv(a.out, out);
  tsv.stream() << "list\trank\tcount\tngram\n";
  auto emit = [&](const char* label, const std::vector<MinedNgram>& items) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      tsv.stream() << label << '\t' << i + 1 << '\t' << items[i].count << '\t' << items[i].key << '\n';
    }
  };
  emit("positive", mined.positive);
  emit("negative", mined.negative);
  tsv.close();

  if (tsv.is_file()) {
    RunManifest m;
    m.command = "mine-bigrams";
    m.config["top"] = a.top;
    m.inputs = {a.known, a.generated};
    m.outputs = {a.out};
    const std::vector<fs::path> hashed{a.known, a.generated};
    m.corpus_sha256 = fingerprint_files(hashed);
    write_manifest(m, manifest_path_for(a.out));
  }
  return kExitOk;
}

// ------------------------------------------------------------------- stats

struct StatsArgs {
  std::vector<std::string> routes;
  std::vector<std::string> dbs;
  std::vector<std::string> known;
  std::string orders = "2,3,4";
  std::string exclude_file;
  std::string out;
  unsigned jobs = 1;
  SettingFlags settings;
};

int cmd_stats(const StatsArgs& a, std::ostream& out, std::ostream&) {
  if (a.dbs.empty() && a.known.empty()) throw Error(ErrorCode::InvalidArgument, "stats needs --db or --known");
  const Settings settings = resolve_settings(a.settings);
  std::vector<NgramDatabase> dbs;
  for (const auto& path : a.dbs) dbs.push_back(load_db(path));
  const auto known_files = expand_inputs(a.known);
  std::set<std::string> excluded;
  if (!a.exclude_file.empty()) excluded = load_patent_list(a.exclude_file);
  if (!known_files.empty()) {
    for (std::size_t n : parse_list<std::size_t>(a.orders, "order")) {
      ScoreConfig cfg = settings.cfg;
      cfg.n = n;
      std::uint64_t ignored = 0;
      dbs.push_back(build_from_files(known_files, cfg, excluded, a.jobs, ignored));
    }
  }

  const auto files = expand_inputs(a.routes);
  const unsigned workers = worker_count(a.jobs, files.size());
  std::vector<std::vector<OverlapAccumulator>> partial(workers);
  std::vector<std::exception_ptr> errors(files.size());
  run_workers(workers, [&](unsigned w) {
    for (const auto& db : dbs) partial[w].emplace_back(db);
    for (std::size_t i = w; i < files.size(); i += workers) {
      try {
        for (const auto& route : load_route_file(files[i])) {
          for (auto& acc : partial[w]) acc.add(route);
        }
      } catch (...) {
        errors[i] = std::current_exception();
        return;
      }
    }
  });
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Output csv(a.out, out);
  csv.stream() << overlap_csv_header() << '\n';
  for (std::size_t d = 0; d < dbs.size(); ++d) {
    OverlapAccumulator total(dbs[d]);
    for (auto& p : partial) total.merge(p[d]);
    write_overlap_csv_row(csv.stream(), total.stats());
  }
  csv.close();

  if (csv.is_file()) {
    RunManifest m;
    m.command = "stats";
    m.config = config_json(settings.cfg);
    m.config.erase("n");
    m.config["orders"] = a.orders;
    m.config["dbs"] = a.dbs;
    m.config["known"] = path_strings(known_files);
    m.inputs = path_strings(files);
    m.outputs = {a.out};
    std::vector<fs::path> hashed = files;
    hashed.insert(hashed.end(), known_files.begin(), known_files.end());
    for (const auto& d : a.dbs) hashed.emplace_back(d);
    if (!a.exclude_file.empty()) hashed.emplace_back(a.exclude_file);
    m.corpus_sha256 = fingerprint_files(hashed);
    write_manifest(m, manifest_path_for(a.out));
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Retro-BLEU route scoring toolkit", "retrobleu"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  BuildDbArgs build;
  auto* build_cmd = app.add_subcommand("build-db", "Build a known n-gram database from route files");
  build_cmd->add_option("--routes", build.routes, "route JSON files or directories");
  build_cmd->add_option("--merge", build.shards, "database shards to merge into the output");
  build_cmd->add_option("--exclude-patents", build.exclude_file, "file with one patent id per line");
  build_cmd->add_option("--out", build.out, "output database")->required();
  build_cmd->add_option("--jobs", build.jobs, "worker threads (0 = all cores)");
  add_chain_settings(build_cmd, build.settings);
  add_config_option(build_cmd, build.settings);

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score routes against a known database");
  score_cmd->add_option("--db", score.db, "known n-gram database")->required();
  score_cmd->add_option("--bigram-db", score.bigram_db, "bigram database when --db is not n=2");
  score_cmd->add_option("--routes", score.routes, "route JSON files or directories");
  score_cmd->add_option("--out", score.out, "CSV output (default: stdout)");
  score_cmd->add_option("--json", score.json, "also write a JSON array of reports");
  score_cmd->add_flag("--strict", score.strict, "stop at the first route error");
  score_cmd->add_option("--jobs", score.jobs, "worker threads (0 = all cores)");
  add_chain_settings(score_cmd, score.settings);
  add_score_settings(score_cmd, score.settings);
  add_config_option(score_cmd, score.settings);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Rank reference routes among candidates");
  eval_cmd->add_option("--cases", eval.cases, "JSON case file")->required();
  eval_cmd->add_option("--db", eval.db, "known n-gram database")->required();
  eval_cmd->add_option("--bigram-db", eval.bigram_db, "bigram database when --db is not n=2");
  eval_cmd->add_option("--metrics", eval.metrics, "comma-separated metrics (default: all)");
  eval_cmd->add_option("--ks", eval.ks, "comma-separated k values")->capture_default_str();
  eval_cmd->add_option("--out-dir", eval.out_dir, "output directory")->required();
  eval_cmd->add_option("--jobs", eval.jobs, "worker threads (0 = all cores)");
  add_chain_settings(eval_cmd, eval.settings);
  add_score_settings(eval_cmd, eval.settings);
  add_config_option(eval_cmd, eval.settings);

  MineArgs mine;
  auto* mine_cmd = app.add_subcommand("mine-bigrams", "List frequent known and unrecorded generated bigrams");
  mine_cmd->add_option("--known", mine.known, "database from validated routes")->required();
  mine_cmd->add_option("--generated", mine.generated, "database from generated routes")->required();
  mine_cmd->add_option("--top", mine.top, "entries per list");
  mine_cmd->add_option("--out", mine.out, "TSV output (default: stdout)");

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Overlap and coverage of a route corpus");
  stats_cmd->add_option("--routes", stats.routes, "route JSON files or directories")->required();
  stats_cmd->add_option("--db", stats.dbs, "known databases to compare against");
  stats_cmd->add_option("--known", stats.known, "known route files to build databases from");
  stats_cmd->add_option("--orders", stats.orders, "n values used with --known");
  stats_cmd->add_option("--exclude-patents", stats.exclude_file, "patent ids left out of --known");
  stats_cmd->add_option("--out", stats.out, "CSV output (default: stdout)");
  stats_cmd->add_option("--jobs", stats.jobs, "worker threads (0 = all cores)");
  add_setting(stats_cmd, stats.settings, "--kind", "kind", "token kind used with --known");
  add_setting(stats_cmd, stats.settings, "--radius", "radius", "template radius used with --known");
  add_config_option(stats_cmd, stats.settings);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (build_cmd->parsed()) return cmd_build_db(build, out, err);
    if (score_cmd->parsed()) return cmd_score(score, out, err);
    if (eval_cmd->parsed()) return cmd_eval(eval, out, err);
    if (mine_cmd->parsed()) return cmd_mine(mine, out, err);
    if (stats_cmd->parsed()) return cmd_stats(stats, out, err);
  } catch (const Error& e) {
    err << "retrobleu: error: " << e.what() << '\n';
    return e.code() == ErrorCode::Io ? kExitIo : kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "retrobleu: error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "retrobleu: error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace retrobleu::cli
