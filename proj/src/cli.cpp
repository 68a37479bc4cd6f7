#include "lexdrift/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lexdrift/corpus.hpp"
#include "lexdrift/divergence.hpp"
#include "lexdrift/error.hpp"
#include "lexdrift/genclient.hpp"
#include "lexdrift/itemgen.hpp"
#include "lexdrift/manifest.hpp"
#include "lexdrift/mixed_model.hpp"
#include "lexdrift/prompts.hpp"
#include "lexdrift/qc.hpp"
#include "lexdrift/random.hpp"
#include "lexdrift/scoring.hpp"
#include "lexdrift/stats.hpp"
#include "lexdrift/study.hpp"
#include "lexdrift/study_http.hpp"
#include "lexdrift/synth.hpp"
#include "lexdrift/text.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro that collides with Eigen internals.
#include <httplib.h>

namespace lexdrift::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------------------------
// File helpers

std::ifstream openInput(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

std::string slurp(const std::string& path) {
  auto in = openInput(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void writeOutput(const std::string& path, const std::string& content) {
  if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  out.flush();
  if (!out) throw Error("cannot write '" + path + "'");
}

/// Refuses runs whose outputs would overwrite one of their inputs.
void ensureDistinct(const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  for (const auto& o : outputs) {
    if (o.empty()) continue;
    const auto po = fs::weakly_canonical(o);
    for (const auto& i : inputs) {
      if (!i.empty() && fs::weakly_canonical(i) == po) {
        throw ValidationError("output '" + o + "' would overwrite input '" + i + "'");
      }
    }
  }
}

Corpus loadCorpus(const std::string& path, const std::string& format) {
  auto in = openInput(path);
  const auto id = fs::path(path).stem().string();
  return format == "conllu" ? parseConlluSubset(in, id) : parseTaggedRecords(in, id);
}

std::vector<std::string> readWordList(const std::string& path) {
  auto in = openInput(path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    for (auto part : text::splitWords(line)) {
      while (!part.empty() && part.back() == ',') part.remove_suffix(1);
      if (!part.empty() && part[0] != '#') words.emplace_back(part);
    }
  }
  return words;
}

std::vector<json> readJsonLines(const std::string& path) {
  auto in = openInput(path);
  std::vector<json> rows;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (text::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      if (!j.is_object()) throw ParseError(lineNo, "expected a JSON object");
      rows.push_back(std::move(j));
    } catch (const json::parse_error& e) {
      throw ParseError(lineNo, e.what());
    }
  }
  return rows;
}

std::vector<TrialRecord> readTrialRecords(const std::string& path) {
  auto in = openInput(path);
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (!text::trim(line).empty()) out.push_back(trialRecordFromJson(line, lineNo));
  }
  return out;
}

std::vector<ItemPair> loadPairs(const std::string& path) {
  auto in = openInput(path);
  return readPairManifest(in);
}

std::string padded(std::size_t n, std::size_t width) {
  auto s = std::to_string(n);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

// ---------------------------------------------------------------------------------------------
// Run context

struct Globals {
  std::uint64_t seed = 1;
  std::string config;
  bool quiet = false;
};

/// Names of options never written to manifests.
bool secret(const std::string& name) { return name == "api-key" || name == "admin-token"; }

std::string optionValue(const CLI::Option* opt) {
  const auto& results = opt->results();
  if (!results.empty()) {
    std::string s;
    for (const auto& r : results) {
      if (!s.empty()) s += ',';
      s += r;
    }
    return s;
  }
  return opt->get_default_str();
}

ordered_json snapshotOptions(const CLI::App* app) {
  ordered_json j = ordered_json::object();
  for (const auto* opt : app->get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "version" || opt->get_lnames().empty()) continue;
    if (secret(name)) {
      j[name] = "<redacted>";
    } else if (opt->get_expected_max() == 0) {
      j[name] = opt->as<bool>();
    } else {
      j[name] = optionValue(opt);
    }
  }
  return j;
}

class Run {
 public:
  Run(std::string subcommand, const CLI::App* root, const CLI::App* sub, std::ostream& out, std::ostream& err,
      const Globals& g)
      : out_(out), err_(err), quiet_(g.quiet) {
    manifest_.subcommand = std::move(subcommand);
    manifest_.startedAt = manifestTimestamp();
    manifest_.config["global"] = snapshotOptions(root);
    manifest_.config["options"] = snapshotOptions(sub);
  }

  void input(const std::string& path) {
    if (!path.empty()) manifest_.inputs.push_back(digestFile(path));
  }
  void output(const std::string& path) {
    if (!path.empty()) outputs_.push_back(path);
  }
  void seed(const std::string& name, std::uint64_t value) { manifest_.seeds.emplace_back(name, value); }
  void extra(const std::string& key, ordered_json value) { manifest_.config[key] = std::move(value); }

  void say(const std::string& line) const {
    if (!quiet_) out_ << line << '\n';
  }
  void warn(const std::string& line) const {
    if (!quiet_) err_ << "warning: " << line << '\n';
  }

  void finish() {
    for (const auto& o : outputs_) manifest_.outputs.push_back(digestFile(o));
    manifest_.finishedAt = manifestTimestamp();
    manifest_.writeBesideOutputs();
  }

 private:
  std::ostream& out_;
  std::ostream& err_;
  bool quiet_;
  RunManifest manifest_;
  std::vector<std::string> outputs_;
};

// ---------------------------------------------------------------------------------------------
// Config file: {"seed": 7, "compare": {"alpha": 0.01}, "generate": {"variants": {"n": 10}}}.
// Values become option defaults, so flags and environment variables still take precedence.

std::string configString(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw ConfigError("config value for '" + key + "' must be a string, number or boolean");
}

void applyConfig(CLI::App* app, const json& section, const std::string& where) {
  if (!section.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    if (value.is_object()) {
      CLI::App* sub = nullptr;
      try {
        sub = app->get_subcommand(key);
      } catch (const CLI::OptionNotFound&) {
        throw ConfigError("config names unknown subcommand '" + where + key + "'");
      }
      applyConfig(sub, value, where + key + ".");
      continue;
    }
    if (key == "config") throw ConfigError("a config file cannot name another config file");
    CLI::Option* opt = nullptr;
    try {
      opt = app->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw ConfigError("config names unknown option '" + where + key + "'");
    }
    try {
      opt->run_callback_for_default()->default_val(configString(value, where + key));
    } catch (const CLI::Error& e) {
      throw ConfigError("config value for '" + where + key + "' is invalid: " + e.what());
    }
    opt->required(false);
  }
}

std::string findConfigPath(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--") break;
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

// ---------------------------------------------------------------------------------------------
// Subcommands. Each registers its options and returns the action to run after parsing.

using Action = std::function<void(const CLI::App* root, CLI::App* sub)>;

struct Env {
  Globals& g;
  std::ostream& out;
  std::ostream& err;
  std::map<const CLI::App*, Action>& actions;
};

void addIngest(CLI::App& app, Env env) {
  struct O {
    std::string format = "records", in, out;
    std::size_t minWords = 0;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("ingest", "Validate a tagged corpus and write normalized line-records");
  sub->add_option("--format", o->format, "Input format")->check(CLI::IsMember({"records", "conllu"}))
      ->capture_default_str();
  sub->add_option("--in", o->in, "Input path")->required();
  sub->add_option("--out", o->out, "Output tagged records")->required();
  sub->add_option("--min-words", o->minWords, "Drop documents shorter than this many words (0 keeps all)")
      ->capture_default_str();
  env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
    ensureDistinct({o->in}, {o->out});
    Run run("ingest", root, s, env.out, env.err, env.g);
    run.input(o->in);
    auto corpus = loadCorpus(o->in, o->format);
    const auto before = corpus.documents.size();
    if (o->minWords > 0) corpus.documents = filterMinWords(std::move(corpus.documents), o->minWords);
    std::ostringstream buf;
    writeTaggedRecords(buf, corpus);
    writeOutput(o->out, buf.str());
    run.output(o->out);
    run.finish();
    run.say("ingested " + std::to_string(corpus.documents.size()) + " of " + std::to_string(before) +
            " documents, " + std::to_string(corpus.totalTokens()) + " tokens");
  };
}

void addCompare(CLI::App& app, Env env) {
  struct O {
    std::string a, b, format = "records", out, novelOut, tableOut;
    double alpha = 0.05;
    std::uint64_t minCountA = 1;
    bool yates = false, excludePunct = false;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("compare", "Per-lemma frequency divergence between a baseline and a comparison corpus");
  sub->add_option("--a", o->a, "Baseline corpus (tagged records)")->required();
  sub->add_option("--b", o->b, "Comparison corpus (tagged records)")->required();
  sub->add_option("--format", o->format, "Input format")->check(CLI::IsMember({"records", "conllu"}))
      ->capture_default_str();
  sub->add_option("--alpha", o->alpha, "Significance level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--min-count-a", o->minCountA, "Baseline count below which a key goes to the novel annex")
      ->capture_default_str();
  sub->add_flag("--yates", o->yates, "Apply the continuity correction");
  sub->add_flag("--exclude-punct", o->excludePunct, "Drop PUNCT and SYM tokens from keys and totals");
  sub->add_option("--out", o->out, "Report CSV")->required();
  sub->add_option("--novel-out", o->novelOut, "Novel-key annex CSV");
  sub->add_option("--table-out", o->tableOut, "Also write the default LHF-Score table");
  env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
    ensureDistinct({o->a, o->b}, {o->out, o->novelOut, o->tableOut});
    Run run("compare", root, s, env.out, env.err, env.g);
    run.input(o->a);
    run.input(o->b);
    const CountOptions co{!o->excludePunct};
    const auto fa = countLemmas(loadCorpus(o->a, o->format), co);
    const auto fb = countLemmas(loadCorpus(o->b, o->format), co);
    auto report = compare(fa, fb, {o->minCountA, o->alpha, o->yates});
    report.id = sha256Hex(sha256File(o->a) + sha256File(o->b)).substr(0, 16);

    std::ostringstream buf;
    writeReportCsv(buf, report);
    writeOutput(o->out, buf.str());
    run.output(o->out);
    if (!o->novelOut.empty()) {
      std::ostringstream nb;
      writeNovelCsv(nb, report);
      writeOutput(o->novelOut, nb.str());
      run.output(o->novelOut);
    }
    if (!o->tableOut.empty()) {
      const auto table = buildScoreTable(report);
      for (const auto& w : table.warnings) run.warn(w);
      std::ostringstream tb;
      writeScoreTableCsv(tb, table);
      writeOutput(o->tableOut, tb.str());
      run.output(o->tableOut);
    }
    run.finish();
    const auto sig = std::count_if(report.rows.begin(), report.rows.end(),
                                   [](const DivergenceRow& r) { return r.increased(); });
    run.say("N_a = " + std::to_string(report.totalA) + ", N_b = " + std::to_string(report.totalB) + "; " +
            std::to_string(report.rows.size()) + " keys, " + std::to_string(sig) +
            " significantly increased, " + std::to_string(report.novel.size()) + " novel");
  };
}

void addBuildTable(CLI::App& app, Env env) {
  struct O {
    std::string report, out;
    bool allRows = false, allowNegative = false;
    double alpha = 0.05;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("build-table", "Build an LHF-Score table from a divergence report");
  sub->add_option("--report", o->report, "Report CSV")->required();
  sub->add_option("--out", o->out, "Score table CSV")->required();
  sub->add_option("--alpha", o->alpha, "Significance level the report was built with")->capture_default_str();
  sub->add_flag("--all-rows", o->allRows, "Include non-significant keys");
  sub->add_flag("--allow-negative", o->allowNegative, "Include keys whose frequency decreased");
  env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
    ensureDistinct({o->report}, {o->out});
    Run run("build-table", root, s, env.out, env.err, env.g);
    run.input(o->report);
    auto in = openInput(o->report);
    auto report = readReportCsv(in, o->alpha);
    report.id = sha256File(o->report).substr(0, 16);
    const auto table = buildScoreTable(report, {!o->allRows, !o->allowNegative});
    for (const auto& w : table.warnings) run.warn(w);
    std::ostringstream buf;
    writeScoreTableCsv(buf, table);
    writeOutput(o->out, buf.str());
    run.output(o->out);
    run.finish();
    run.say(std::to_string(table.weights.size()) + " weighted keys");
  };
}

void addOverlap(CLI::App& app, Env env) {
  struct O {
    std::string report, reference, other, out;
    double alpha = 0.05;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("overlap", "Compare significantly increased keys with a word list or another report");
  sub->add_option("--report", o->report, "Report CSV")->required();
  sub->add_option("--reference", o->reference, "Word list, one or more words per line");
  sub->add_option("--other", o->other, "Second report CSV for a cross-check");
  sub->add_option("--alpha", o->alpha, "Significance level")->capture_default_str();
  sub->add_option("--out", o->out, "JSON result");
  env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
    if (o->reference.empty() && o->other.empty()) throw ValidationError("overlap needs --reference or --other");
    ensureDistinct({o->report, o->reference, o->other}, {o->out});
    Run run("overlap", root, s, env.out, env.err, env.g);
    run.input(o->report);
    auto in = openInput(o->report);
    const auto report = readReportCsv(in, o->alpha);
    ordered_json result;
    if (!o->reference.empty()) {
      run.input(o->reference);
      const auto r = overlapWithReference(report, readWordList(o->reference));
      ordered_json matched = ordered_json::array();
      for (const auto& m : r.matched) matched.push_back({{"reference", m.reference}, {"key", m.key.canonical()}});
      result["reference"] = {{"matched", r.matchedCount}, {"total", r.referenceCount}, {"matches", matched}};
      run.say("reference words found among increased keys: " + std::to_string(r.matchedCount) + " of " +
              std::to_string(r.referenceCount));
    }
    if (!o->other.empty()) {
      run.input(o->other);
      auto oin = openInput(o->other);
      const auto c = crossOverlap(report, readReportCsv(oin, o->alpha));
      result["cross"] = {{"both", c.both}, {"only_report", c.onlyAb}};
      run.say("increased keys also increased in the other report: " + std::to_string(c.both) + " of " +
              std::to_string(c.both + c.onlyAb));
    }
    if (!o->out.empty()) {
      writeOutput(o->out, result.dump(2) + "\n");
      run.output(o->out);
    }
    run.finish();
  };
}

void addScore(CLI::App& app, Env env) {
  struct O {
    std::string table, in, out;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("score", "Score tagged documents with an LHF-Score table");
  sub->add_option("--table", o->table, "Score table CSV")->required();
  sub->add_option("--in", o->in, "Tagged records")->required();
  sub->add_option("--out", o->out, "Scored-variant CSV")->required();
  env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
    ensureDistinct({o->table, o->in}, {o->out});
    Run run("score", root, s, env.out, env.err, env.g);
    run.input(o->table);
    run.input(o->in);
    auto tin = openInput(o->table);
    const auto table = readScoreTableCsv(tin);
    const auto corpus = loadCorpus(o->in, "records");
    std::ostringstream buf;
    buf << "abstract_id,variant_id,word_count,lhf_score\n";
    for (const auto& d : corpus.documents) {
      const auto v = makeVariant(d, table);
      buf << text::csvField(v.abstractId) << ',' << text::csvField(v.variantId) << ',' << v.wordCount << ','
          << text::fixed(v.lhfScore, 4) << '\n';
    }
    writeOutput(o->out, buf.str());
    run.output(o->out);
    run.finish();
    run.say("scored " + std::to_string(corpus.documents.size()) + " documents");
  };
}

void addSelectPairs(CLI::App& app, Env env) {
  struct O {
    std::string variants, table, banned, out, mode = "within";
    std::size_t k = 30, lengthTol = 2, minWords = 90, maxWords = 110;
    bool noBanned = false;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("select-pairs", "Select length-matched low/high LHF-Score variant pairs");
  sub->add_option("--variants", o->variants, "Tagged variant records with abstract_id/variant_id")->required();
  sub->add_option("--table", o->table, "Score table CSV")->required();
  sub->add_option("--k", o->k, "Number of pairs")->capture_default_str();
  sub->add_option("--length-tol", o->lengthTol, "Maximum word-count difference within a pair")
      ->capture_default_str();
  sub->add_option("--min-words", o->minWords, "Shortest admissible variant")->capture_default_str();
  sub->add_option("--max-words", o->maxWords, "Longest admissible variant")->capture_default_str();
  sub->add_option("--banned", o->banned, "Banned-word list replacing the built-in one");
  sub->add_flag("--no-banned", o->noBanned, "Disable banned-word filtering");
  sub->add_option("--mode", o->mode, "Runner-up handling")->check(CLI::IsMember({"within", "replacement"}))
      ->capture_default_str();
  sub->add_option("--out", o->out, "Pair manifest (line-records)")->required();
  env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
    ensureDistinct({o->variants, o->table, o->banned}, {o->out});
    Run run("select-pairs", root, s, env.out, env.err, env.g);
    run.input(o->variants);
    run.input(o->table);
    auto tin = openInput(o->table);
    const auto table = readScoreTableCsv(tin);
    FilterConfig fc;
    fc.minWords = o->minWords;
    fc.maxWords = o->maxWords;
    if (o->noBanned) {
      fc.banned.clear();
    } else if (!o->banned.empty()) {
      run.input(o->banned);
      fc.banned = readWordList(o->banned);
    }
    const auto corpus = loadCorpus(o->variants, "records");
    std::vector<Variant> variants;
    variants.reserve(corpus.documents.size());
    for (const auto& d : corpus.documents) variants.push_back(makeVariant(d, table));
    const auto total = variants.size();
    variants = filterVariants(std::move(variants), fc);
    const auto set = pairPerAbstract(variants);
    for (const auto& w : set.warnings) run.warn(w);
    const auto pairs = selectTopPairs(
        set.candidates,
        {o->k, o->lengthTol, o->mode == "within" ? RunnerUpMode::WithinAbstract : RunnerUpMode::AbstractReplacement});
    std::ostringstream buf;
    writePairManifest(buf, pairs);
    writeOutput(o->out, buf.str());
    run.output(o->out);
    run.finish();
    run.say(std::to_string(variants.size()) + " of " + std::to_string(total) + " variants passed the filters; " +
            std::to_string(pairs.size()) + " pairs selected");
    run.say(summarize(pairs).render());
  };
}

StudyConfig studyConfig(const std::string& pairsPath, const std::string& controlsPath, std::uint64_t seed,
                        std::size_t critical, Run& run) {
  StudyConfig config;
  run.input(pairsPath);
  config.pairs = loadPairs(pairsPath);
  config.criticalPerSession = critical;
  config.seed = seed;
  addDefaultControls(config);
  if (!controlsPath.empty()) {
    run.input(controlsPath);
    try {
      loadControls(config, json::parse(slurp(controlsPath)));
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("malformed controls file: ") + e.what());
    }
  }
  return config;
}

std::atomic<bool> gStop{false};
extern "C" void onSignal(int) { gStop = true; }

void addServe(CLI::App& app, Env env) {
  struct O {
    std::string pairs, controls, log, host = "127.0.0.1", adminToken, staticDir;
    int port = 8080;
    std::size_t critical = 20;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("serve", "Run the pairwise preference study server");
  sub->add_option("--pairs", o->pairs, "Pair manifest")->required();
  sub->add_option("--controls", o->controls, "Calibration/gotcha/proficiency items (JSON)");
  sub->add_option("--log", o->log, "Append-only event log; replayed on start")->required();
  sub->add_option("--host", o->host, "Bind address")->capture_default_str();
  sub->add_option("--port", o->port, "Port")->check(CLI::Range(0, 65535))->capture_default_str();
  sub->add_option("--admin-token", o->adminToken, "Bearer token for the export route")
      ->envname("LEXDRIFT_ADMIN_TOKEN");
  sub->add_option("--static", o->staticDir, "Front-end bundle served at /");
  sub->add_option("--critical", o->critical, "Critical items per session")->capture_default_str();
  env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
    Run run("serve", root, s, env.out, env.err, env.g);
    run.seed("study", env.g.seed);
    auto config = studyConfig(o->pairs, o->controls, env.g.seed, o->critical, run);
    auto clock = [] {
      return std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::system_clock::now().time_since_epoch())
          .count();
    };
    // Rebuild state from an existing log, then keep appending to it. Replay never re-appends.
    std::ofstream logFile;
    std::unique_ptr<EventLog> log;
    const bool resume = fs::exists(o->log);
    logFile.open(o->log, std::ios::binary | std::ios::app);
    if (!logFile) throw Error("cannot open event log '" + o->log + "'");
    log = std::make_unique<EventLog>(logFile);
    auto service = std::make_unique<StudyService>(config, log.get(), clock);
    if (resume) {
      auto in = openInput(o->log);
      service->replay(in);
    }
    httplib::Server server;
    mountStudyApi(server, *service, {o->adminToken, o->staticDir});
    if (o->adminToken.empty()) run.warn("no admin token set; the export route is disabled");

    gStop = false;
    std::signal(SIGINT, onSignal);
    std::signal(SIGTERM, onSignal);
    std::thread watcher([&] {
      auto lastSweep = std::chrono::steady_clock::now();
      while (!gStop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        if (std::chrono::steady_clock::now() - lastSweep > std::chrono::minutes(1)) {
          service->expireIdle(clock());
          lastSweep = std::chrono::steady_clock::now();
        }
      }
      server.stop();
    });
    run.say("serving on http://" + o->host + ":" + std::to_string(o->port));
    const bool ok = server.listen(o->host, o->port);
    gStop = true;
    watcher.join();
    std::signal(SIGINT, SIG_DFL);
    std::signal(SIGTERM, SIG_DFL);
    if (!ok) throw Error("cannot listen on " + o->host + ":" + std::to_string(o->port));
  };
}

void addExclude(CLI::App& app, Env env) {
  struct O {
    std::string in, out, report, rule = "strict";
    QcConfig qc;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("exclude", "Apply participant and rating exclusion rules");
  sub->add_option("--in", o->in, "Trial records (line-records)")->required();
  sub->add_option("--out", o->out, "Retained ratings CSV")->required();
  sub->add_option("--report", o->report, "Exclusion report JSON")->required();
  sub->add_option("--min-items", o->qc.minItems, "Minimum responses per participant")->capture_default_str();
  sub->add_option("--speed-factor", o->qc.speedFactor, "Fraction of the reading-time floor")
      ->capture_default_str();
  sub->add_option("--fast-limit", o->qc.fastTrialLimit, "Fast ratings that exclude a participant")
      ->capture_default_str();
  sub->add_option("--gotcha-items", o->qc.gotchaItems, "Gotcha items per session")->capture_default_str();
  sub->add_option("--gotcha-rule", o->rule, "strict: both gotchas right; lenient: at least one")
      ->check(CLI::IsMember({"strict", "lenient"}))
      ->capture_default_str();
  env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
    ensureDistinct({o->in}, {o->out, o->report});
    Run run("exclude", root, s, env.out, env.err, env.g);
    run.input(o->in);
    o->qc.gotchaRule = o->rule == "strict" ? GotchaRule::Strict : GotchaRule::Lenient;
    const auto result = applyExclusions(readTrialRecords(o->in), o->qc);
    std::ostringstream buf;
    writeRetainedCsv(buf, result.retained);
    writeOutput(o->out, buf.str());
    writeOutput(o->report, toJson(result.report, o->qc) + "\n");
    run.output(o->out);
    run.output(o->report);
    run.finish();
    run.say(renderText(result.report));
  };
}

void addAnalyze(CLI::App& app, Env env) {
  struct O {
    std::string in, pairs, marker, out, itemsOut;
    bool dense = false;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("analyze", "Preference tests and the mixed-effects model on retained ratings");
  sub->add_option("--in", o->in, "Retained ratings CSV")->required();
  sub->add_option("--pairs", o->pairs, "Pair manifest (needed for --marker)");
  sub->add_option("--marker", o->marker, "lemma_UPOS key for the subgroup split, e.g. nuanced_ADJ");
  sub->add_option("--out", o->out, "Analysis report JSON")->required();
  sub->add_option("--items-out", o->itemsOut, "Per-item CSV");
  sub->add_flag("--dense", o->dense, "Use the dense reference likelihood");
  env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
    if (!o->marker.empty() && o->pairs.empty()) throw ValidationError("--marker needs --pairs");
    ensureDistinct({o->in, o->pairs}, {o->out, o->itemsOut});
    Run run("analyze", root, s, env.out, env.err, env.g);
    run.input(o->in);
    auto in = openInput(o->in);
    const auto ratings = readRetainedCsv(in);
    if (ratings.empty()) throw ValidationError("no retained ratings to analyze");
    const auto desc = itemDescriptives(ratings);
    const auto gof = chi2Gof(desc.nHigh, desc.nRatings);
    mixed::FitOptions fo;
    fo.dense = o->dense;
    const auto fit = mixed::fitMixedLpm(ratings, fo);

    ordered_json j;
    j["n_ratings"] = desc.nRatings;
    j["n_high"] = desc.nHigh;
    j["pooled_high_preference"] = desc.pooled;
    j["gof"] = {{"statistic", gof.statistic}, {"df", gof.df}, {"p", gof.p}};
    j["model"] = {{"beta", fit.beta},
                  {"se", fit.se},
                  {"z", fit.z},
                  {"p", fit.p},
                  {"sigma2_item", fit.sigma2Item},
                  {"sigma2_user", fit.sigma2User},
                  {"sigma2_resid", fit.sigma2Resid},
                  {"loglik", fit.loglik},
                  {"n_obs", fit.nObs},
                  {"n_users", fit.nUsers},
                  {"n_items", fit.nItems},
                  {"converged", fit.converged},
                  {"iterations", fit.iterations}};
    std::string textReport = "Retained ratings: " + std::to_string(desc.nRatings) +
                             " (model N = " + std::to_string(fit.nObs) + ")\n" +
                             "High LHF-Score variant preferred: " + formatPct(desc.pooled) + " vs " +
                             formatPct(1 - desc.pooled) + " (χ² = " + text::fixed(gof.statistic, 2) + ", " +
                             formatP(gof.p) + ")\n" + mixed::render(fit) + "\n";
    if (!fit.converged) run.warn("the mixed model did not converge");

    if (!o->marker.empty()) {
      run.input(o->pairs);
      const auto key = LemmaKey::parse(o->marker);
      const auto sg = subgroupDescriptives(ratings, loadPairs(o->pairs), key);
      ordered_json g;
      g["marker"] = key.canonical();
      g["mean_with"] = sg.meanWith ? json(*sg.meanWith) : json(nullptr);
      g["mean_without"] = sg.meanWithout ? json(*sg.meanWithout) : json(nullptr);
      g["n_with"] = sg.nWith;
      g["n_without"] = sg.nWithout;
      g["items_with"] = sg.itemsWith;
      g["flags"] = sg.flags;
      j["subgroup"] = std::move(g);
      auto pct = [](const std::optional<double>& v) { return v ? formatPct(*v) : std::string("n/a"); };
      textReport += "Items with " + key.canonical() + ": " + pct(sg.meanWith) + " vs without: " +
                    pct(sg.meanWithout) + "\n";
      for (const auto& f : sg.flags) run.warn(f);
    }
    j["text"] = textReport;
    writeOutput(o->out, j.dump(2) + "\n");
    run.output(o->out);
    if (!o->itemsOut.empty()) {
      std::ostringstream buf;
      buf << "item_id,n,mean_high_preference\n";
      for (const auto& it : desc.items) {
        buf << text::csvField(it.itemId) << ',' << it.nRatings << ',' << text::fixed(it.meanHighPreference, 6)
            << '\n';
      }
      writeOutput(o->itemsOut, buf.str());
      run.output(o->itemsOut);
    }
    run.finish();
    run.say(textReport.substr(0, textReport.size() - 1));
  };
}

// --- generate -----------------------------------------------------------------------------------

struct GenOptions {
  std::string apiBase = "http://127.0.0.1:8000", apiPath = "v1/chat/completions", apiKey;
  std::string baseModel, instructModel, cleanerModel, params = "{}";
  int attempts = 3, timeout = 120;
  long backoffMs = 1000;
  double rate = 2.0;
};

void addGenOptions(CLI::App* sub, GenOptions& g) {
  sub->add_option("--api-base", g.apiBase, "Endpoint base URL")->envname("LEXDRIFT_API_BASE")->capture_default_str();
  sub->add_option("--api-path", g.apiPath, "Endpoint path")->capture_default_str();
  sub->add_option("--api-key", g.apiKey, "Bearer key")->envname("LEXDRIFT_API_KEY");
  sub->add_option("--base-model", g.baseModel, "Model name for the base-model profile");
  sub->add_option("--instruct-model", g.instructModel, "Model name for the instruct-model profile");
  sub->add_option("--cleaner-model", g.cleanerModel, "Model name for the cleaner profile");
  sub->add_option("--params", g.params, "Decoding parameters as a JSON object, passed through")
      ->capture_default_str();
  sub->add_option("--attempts", g.attempts, "Attempts per request")->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--backoff-ms", g.backoffMs, "First retry delay, doubled per retry")->capture_default_str();
  sub->add_option("--rate", g.rate, "Requests per second")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--timeout", g.timeout, "Request timeout in seconds")->capture_default_str();
}

json parseParams(const std::string& s) {
  try {
    auto j = json::parse(s);
    if (!j.is_object()) throw ConfigError("--params must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("--params is not valid JSON: ") + e.what());
  }
}

GenClient makeClient(const GenOptions& g, const Run& run) {
  auto profile = [&](const std::string& model) {
    HttpProfile p;
    p.baseUrl = g.apiBase;
    p.path = g.apiPath;
    p.model = model;
    p.apiKey = g.apiKey;
    p.timeoutSeconds = g.timeout;
    return p;
  };
  auto transport = std::make_shared<HttpTransport>(std::map<EndpointProfile, HttpProfile>{
      {EndpointProfile::BaseModel, profile(g.baseModel)},
      {EndpointProfile::InstructModel, profile(g.instructModel)},
      {EndpointProfile::Cleaner, profile(g.cleanerModel)}});
  ClientOptions co;
  co.attempts = g.attempts;
  co.initialBackoff = std::chrono::milliseconds(g.backoffMs);
  co.ratePerSecond = g.rate;
  co.log = [&run](std::string_view m) { run.warn(std::string(m)); };
  return GenClient(transport, co);
}

std::string recordId(const json& row, std::size_t index) {
  for (const char* k : {"doc_id", "abstract_id", "variant_id", "id"}) {
    if (row.contains(k) && row[k].is_string()) return row[k].get<std::string>();
  }
  return std::to_string(index + 1);
}

std::string fieldText(const json& row, const std::string& field, std::size_t lineNo) {
  if (!row.contains(field) || !row[field].is_string()) {
    throw ParseError(lineNo, "record has no string field '" + field + "'");
  }
  return row[field].get<std::string>();
}

/// Shared driver: one output line per input, serialized writes, failures counted but not fatal until the end.
struct GenTally {
  std::size_t written = 0, empty = 0, failed = 0;
};

void finishGenerate(Run& run, const std::string& out, const GenTally& t, std::size_t inputs) {
  run.output(out);
  run.finish();
  run.say("wrote " + std::to_string(t.written) + " records from " + std::to_string(inputs) + " inputs (" +
          std::to_string(t.empty) + " empty, " + std::to_string(t.failed) + " failed)");
  if (t.failed > 0) throw Error(std::to_string(t.failed) + " generation request(s) failed after retries");
}

void addGenerate(CLI::App& app, Env env) {
  auto* gen = app.add_subcommand("generate", "Call a text-generation endpoint with the fixed prompt templates");
  gen->require_subcommand(1);

  struct O {
    GenOptions g;
    std::string in, out, profile = "instruct-model", mode = "variant", field = "text";
    std::size_t n = 500, minWords = 40;
    bool clean = false;
  };

  // continue
  {
    auto o = std::make_shared<O>();
    auto* sub = gen->add_subcommand("continue", "Continue the first half of each document");
    sub->add_option("--in", o->in, "JSON lines with doc_id and text")->required();
    sub->add_option("--out", o->out, "Output JSON lines")->required();
    sub->add_option("--profile", o->profile, "Endpoint profile")
        ->check(CLI::IsMember({"base-model", "instruct-model"}))
        ->capture_default_str();
    sub->add_option("--min-words", o->minWords, "Skip shorter documents")->capture_default_str();
    sub->add_flag("--clean", o->clean, "Run the continuation cleaner on each output");
    addGenOptions(sub, o->g);
    env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
      ensureDistinct({o->in}, {o->out});
      Run run("generate continue", root, s, env.out, env.err, env.g);
      run.input(o->in);
      run.extra("template_version", std::string(prompts::kTemplateVersion));
      const auto params = parseParams(o->g.params);
      auto client = makeClient(o->g, run);
      const auto rows = readJsonLines(o->in);
      const auto profile = *parseEndpointProfile(o->profile);
      std::ofstream out(o->out, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write '" + o->out + "'");
      GenTally t;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto full = fieldText(rows[i], "text", i + 1);
        if (wordCount(full) < std::max<std::size_t>(o->minWords, 2)) continue;
        const auto [first, second] = splitForContinuation(full);
        try {
          auto cont = continueAbstract(client, first, profile, params);
          if (cont && o->clean) cont = cleanText(client, *cont, CleanMode::Continuation, params);
          if (!cont) {
            ++t.empty;
            continue;
          }
          ordered_json j;
          j["doc_id"] = recordId(rows[i], i);
          j["first_half"] = first;
          j["text"] = *cont;
          out << j.dump() << '\n' << std::flush;
          ++t.written;
        } catch (const TransportError& e) {
          run.warn(recordId(rows[i], i) + ": " + e.what());
          ++t.failed;
        }
      }
      out.close();
      finishGenerate(run, o->out, t, rows.size());
    };
  }

  // keywords
  {
    auto o = std::make_shared<O>();
    auto* sub = gen->add_subcommand("keywords", "Summarize each abstract as a keyword line");
    sub->add_option("--in", o->in, "JSON lines with abstract_id and text")->required();
    sub->add_option("--out", o->out, "Output JSON lines")->required();
    addGenOptions(sub, o->g);
    env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
      ensureDistinct({o->in}, {o->out});
      Run run("generate keywords", root, s, env.out, env.err, env.g);
      run.input(o->in);
      run.extra("template_version", std::string(prompts::kTemplateVersion));
      const auto params = parseParams(o->g.params);
      auto client = makeClient(o->g, run);
      const auto rows = readJsonLines(o->in);
      std::ofstream out(o->out, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write '" + o->out + "'");
      GenTally t;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
          const auto kw = summarizeKeywords(client, fieldText(rows[i], "text", i + 1), params);
          if (!kw) {
            ++t.empty;
            continue;
          }
          ordered_json j;
          j["abstract_id"] = recordId(rows[i], i);
          j["keywords"] = *kw;
          out << j.dump() << '\n' << std::flush;
          ++t.written;
        } catch (const TransportError& e) {
          run.warn(recordId(rows[i], i) + ": " + e.what());
          ++t.failed;
        }
      }
      out.close();
      finishGenerate(run, o->out, t, rows.size());
    };
  }

  // variants
  {
    auto o = std::make_shared<O>();
    auto* sub = gen->add_subcommand("variants", "Generate n abstracts per keyword line");
    sub->add_option("--in", o->in, "JSON lines with abstract_id and keywords")->required();
    sub->add_option("--out", o->out, "Output JSON lines")->required();
    sub->add_option("--n", o->n, "Variants per abstract")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_flag("--clean", o->clean, "Run the variant cleaner on each output");
    addGenOptions(sub, o->g);
    env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
      ensureDistinct({o->in}, {o->out});
      Run run("generate variants", root, s, env.out, env.err, env.g);
      run.input(o->in);
      run.seed("decoding", env.g.seed);
      run.extra("template_version", std::string(prompts::kTemplateVersion));
      const auto params = parseParams(o->g.params);
      auto client = makeClient(o->g, run);
      const auto rows = readJsonLines(o->in);
      std::ofstream out(o->out, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write '" + o->out + "'");
      const auto width = std::to_string(o->n).size();
      GenTally t;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto id = recordId(rows[i], i);
        const auto keywords = fieldText(rows[i], "keywords", i + 1);
        const auto base = env.g.seed ^ rnd::fnv1a(id);
        for (std::size_t k = 0; k < o->n; ++k) {
          try {
            const auto p = variantParams(params, base, k);
            auto v = generateVariant(client, keywords, p);
            if (v && o->clean) v = cleanText(client, *v, CleanMode::Variant, p);
            if (!v) {
              ++t.empty;
              continue;
            }
            ordered_json j;
            j["abstract_id"] = id;
            j["variant_id"] = id + "-v" + padded(k + 1, width);
            j["text"] = *v;
            out << j.dump() << '\n' << std::flush;
            ++t.written;
          } catch (const TransportError& e) {
            run.warn(id + " #" + std::to_string(k + 1) + ": " + e.what());
            ++t.failed;
          }
        }
      }
      out.close();
      finishGenerate(run, o->out, t, rows.size());
    };
  }

  // clean
  {
    auto o = std::make_shared<O>();
    auto* sub = gen->add_subcommand("clean", "Strip model commentary from generated texts");
    sub->add_option("--in", o->in, "JSON lines")->required();
    sub->add_option("--out", o->out, "Output JSON lines; records cleaned to nothing are dropped")->required();
    sub->add_option("--mode", o->mode, "Cleaning template")->check(CLI::IsMember({"continuation", "variant"}))
        ->capture_default_str();
    sub->add_option("--field", o->field, "Field holding the text")->capture_default_str();
    addGenOptions(sub, o->g);
    env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
      ensureDistinct({o->in}, {o->out});
      Run run("generate clean", root, s, env.out, env.err, env.g);
      run.input(o->in);
      run.extra("template_version", std::string(prompts::kTemplateVersion));
      const auto params = parseParams(o->g.params);
      auto client = makeClient(o->g, run);
      const auto rows = readJsonLines(o->in);
      const auto mode = o->mode == "continuation" ? CleanMode::Continuation : CleanMode::Variant;
      std::ofstream out(o->out, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write '" + o->out + "'");
      GenTally t;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
          const auto cleaned = cleanText(client, fieldText(rows[i], o->field, i + 1), mode, params);
          if (!cleaned) {
            ++t.empty;
            continue;
          }
          auto row = rows[i];
          row[o->field] = *cleaned;
          out << row.dump() << '\n' << std::flush;
          ++t.written;
        } catch (const TransportError& e) {
          run.warn(recordId(rows[i], i) + ": " + e.what());
          ++t.failed;
        }
      }
      out.close();
      finishGenerate(run, o->out, t, rows.size());
    };
  }
}

// --- synthetic data -----------------------------------------------------------------------------

void addSynth(CLI::App& app, Env env) {
  struct O {
    std::string outDir;
    std::size_t docs = 1000, abstracts = 50, perAbstract = 40;
    double boost = 8.0;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("synth", "Write seeded synthetic corpora and variant records");
  sub->add_option("--out-dir", o->outDir, "Directory for base.jsonl, instruct.jsonl, variants.jsonl")->required();
  sub->add_option("--docs", o->docs, "Documents per corpus")->capture_default_str();
  sub->add_option("--abstracts", o->abstracts, "Abstracts with variants")->capture_default_str();
  sub->add_option("--per-abstract", o->perAbstract, "Variants per abstract")->capture_default_str();
  sub->add_option("--boost", o->boost, "Weight multiplier for overused lemmas on the instruct side")
      ->capture_default_str();
  env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
    Run run("synth", root, s, env.out, env.err, env.g);
    const auto seed = env.g.seed;
    run.seed("synth", seed);
    fs::create_directories(o->outDir);
    auto emit = [&](const std::string& name, const Corpus& c) {
      const auto path = (fs::path(o->outDir) / name).string();
      std::ostringstream buf;
      writeTaggedRecords(buf, c);
      writeOutput(path, buf.str());
      run.output(path);
    };
    emit("base.jsonl", synth::makeCorpus({o->docs, 60, 140, 1.0, "base", rnd::splitmix64(seed ^ 1)}));
    emit("instruct.jsonl", synth::makeCorpus({o->docs, 60, 140, o->boost, "instruct", rnd::splitmix64(seed ^ 2)}));
    synth::VariantSpec vs;
    vs.abstracts = o->abstracts;
    vs.perAbstract = o->perAbstract;
    vs.seed = rnd::splitmix64(seed ^ 3);
    emit("variants.jsonl", synth::makeVariants(vs));
    run.finish();
    run.say("wrote synthetic corpora to " + o->outDir);
  };
}

void addSimulate(CLI::App& app, Env env) {
  struct O {
    std::string pairs, controls, out, log;
    std::size_t critical = 20;
    synth::StudySimSpec spec;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("simulate", "Run scripted participants through an in-memory study");
  sub->add_option("--pairs", o->pairs, "Pair manifest")->required();
  sub->add_option("--controls", o->controls, "Control items (JSON)");
  sub->add_option("--out", o->out, "Trial records (line-records)")->required();
  sub->add_option("--log", o->log, "Event log copy");
  sub->add_option("--participants", o->spec.participants, "Participants")->capture_default_str();
  sub->add_option("--critical", o->critical, "Critical items per session")->capture_default_str();
  sub->add_option("--beta", o->spec.beta, "Baseline probability of choosing high")->capture_default_str();
  sub->add_option("--sigma2-user", o->spec.sigma2User, "Participant variance")->capture_default_str();
  sub->add_option("--sigma2-item", o->spec.sigma2Item, "Item variance")->capture_default_str();
  sub->add_option("--incomplete-rate", o->spec.incompleteRate, "Share who stop early")->capture_default_str();
  sub->add_option("--gotcha-fail-rate", o->spec.gotchaFailRate, "Share who miss gotchas")->capture_default_str();
  sub->add_option("--speeder-rate", o->spec.speederRate, "Share who answer too fast")->capture_default_str();
  sub->add_option("--fast-rating-rate", o->spec.fastRatingRate, "Per-rating fast probability")
      ->capture_default_str();
  env.actions[sub] = [o, env](const CLI::App* root, CLI::App* s) {
    ensureDistinct({o->pairs, o->controls}, {o->out, o->log});
    Run run("simulate", root, s, env.out, env.err, env.g);
    run.seed("study", env.g.seed);
    run.seed("participants", rnd::splitmix64(env.g.seed ^ 4));
    const auto config = studyConfig(o->pairs, o->controls, env.g.seed, o->critical, run);
    o->spec.seed = rnd::splitmix64(env.g.seed ^ 4);
    const auto result = synth::simulateStudy(config, o->spec);
    std::ostringstream buf;
    for (const auto& r : result.records) buf << toJsonLine(r) << '\n';
    writeOutput(o->out, buf.str());
    run.output(o->out);
    if (!o->log.empty()) {
      writeOutput(o->log, result.eventLog);
      run.output(o->log);
    }
    run.finish();
    run.say("simulated " + std::to_string(o->spec.participants) + " participants, " +
            std::to_string(result.records.size()) + " responses");
  };
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Globals g;
  std::map<const CLI::App*, Action> actions;
  CLI::App app{"Lexical overuse toolkit: corpus divergence, LHF scoring, item pairs, study serving and analysis",
               "lexdrift"};
  app.set_version_flag("--version", kToolVersion);
  app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--config", g.config, "JSON config file; flags and environment variables override it");
  app.add_flag("--quiet", g.quiet, "Suppress progress output and warnings");
  app.require_subcommand(1);
  app.fallthrough();

  Env env{g, out, err, actions};
  addIngest(app, env);
  addCompare(app, env);
  addBuildTable(app, env);
  addOverlap(app, env);
  addScore(app, env);
  addSelectPairs(app, env);
  addServe(app, env);
  addExclude(app, env);
  addAnalyze(app, env);
  addGenerate(app, env);
  addSynth(app, env);
  addSimulate(app, env);

  try {
    if (const auto path = findConfigPath(args); !path.empty()) {
      json cfg;
      try {
        cfg = json::parse(slurp(path));
      } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
      }
      applyConfig(&app, cfg, "");
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::Success& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      app.exit(e, out, err);
      if (dynamic_cast<const CLI::RequiredError*>(&e) || dynamic_cast<const CLI::ExtrasError*>(&e)) {
        err << app.help() << '\n';
      }
      return 2;
    }
    CLI::App* leaf = &app;
    while (!leaf->get_subcommands().empty()) leaf = leaf->get_subcommands().front();
    const auto it = actions.find(leaf);
    if (it == actions.end()) {
      err << leaf->help();
      return 2;
    }
    it->second(&app, leaf);
    return 0;
  } catch (const ParseError& e) {
    err << "error: line " << e.line() << ": " << e.what() << '\n';
  } catch (const InsufficientPairsError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace lexdrift::cli
