#include "lfqa/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "lfqa/abstractive.hpp"
#include "lfqa/extract.hpp"
#include "lfqa/parallel.hpp"
#include "lfqa/study.hpp"
#include "lfqa/study_server.hpp"
#include "lfqa/text.hpp"

namespace lfqa {

using nlohmann::json;

bool SystemSpec::remote() const {
  return kind == Kind::external_extract || kind == Kind::abstractive ||
         (kind == Kind::decontext && backend == "external");
}

SystemSpec parse_system_spec(const std::string& spec) {
  auto bad = [&](const std::string& why) { return ConfigError("bad system spec '" + spec + "': " + why); };
  SystemSpec s;
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string tail = colon == std::string::npos ? "" : spec.substr(colon + 1);
  const bool has_tail = colon != std::string::npos;

  if (head.rfind("lead", 0) == 0 && head.size() > 4 && !has_tail) {
    const auto digits = head.substr(4);
    if (!std::all_of(digits.begin(), digits.end(), ::isdigit) || digits.size() > 3) throw bad("expected lead<k>");
    s.kind = SystemSpec::Kind::lead;
    s.k = std::stoul(digits);
    if (s.k == 0) throw bad("k must be >= 1");
    return s;
  }
  if (head == "overlap" && !has_tail) {
    s.kind = SystemSpec::Kind::overlap;
    return s;
  }
  if (head == "gold" && !has_tail) {
    s.kind = SystemSpec::Kind::gold;
    return s;
  }
  if (head == "external-extract") {
    s.kind = SystemSpec::Kind::external_extract;
    if (!has_tail || tail == "q+a") return s;
    if (tail == "a") {
      s.include_question = false;
      return s;
    }
    throw bad("expected external-extract[:q+a|:a]");
  }
  if (head == "decontext") {
    if (tail != "rules" && tail != "external") throw bad("backend must be rules or external");
    s.kind = SystemSpec::Kind::decontext;
    s.backend = tail;
    return s;
  }
  if (head == "abstractive") {
    s.kind = SystemSpec::Kind::abstractive;
    s.include_question = false;
    bool answer = false;
    std::set<std::string> seen;
    std::stringstream ss(tail);
    std::string flag;
    while (std::getline(ss, flag, '+')) {
      if (!seen.insert(flag).second) throw bad("repeated flag '" + flag + "'");
      if (flag == "q") s.include_question = true;
      else if (flag == "a") answer = true;
      else if (flag == "l") s.length_control = true;
      else throw bad("unknown flag '" + flag + "'");
    }
    if (!answer) throw bad("flags must include 'a'");
    return s;
  }
  throw bad("unknown system");
}

RunManifest manifest_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("manifest must be a JSON object");
  RunManifest m;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "corpus") m.corpus = v.get<std::string>();
      else if (key == "seed") m.seed = v.get<std::uint64_t>();
      else if (key == "system") m.system = v.get<std::string>();
      else if (key == "split") m.split = v.get<std::string>();
      else if (key == "output") m.output = v.get<std::string>();
      else if (key == "text_output") m.text_output = v.get<std::string>();
      else if (key == "candidates") m.candidates = v.get<std::string>();
      else if (key == "tune_corpus") m.tune_corpus = v.get<std::string>();
      else if (key == "threshold") m.threshold = v.get<double>();
      else if (key == "base") m.base = v.get<std::string>();
      else if (key == "endpoint") m.endpoint = v.get<std::string>();
      else if (key == "embed_endpoint") m.embed_endpoint = v.get<std::string>();
      else if (key == "jobs") m.jobs = v.get<std::size_t>();
      else throw ConfigError("unknown manifest key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad manifest: ") + e.what());
  }
  return m;
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("manifest " + path.string() + " is not valid JSON");
  return manifest_from_json(j);
}

Corpus select_partition(const Corpus& corpus, const RunManifest& m) {
  if (m.split == "all") return corpus;
  if (m.split != "train" && m.split != "validation" && m.split != "test") {
    throw ConfigError("split must be all, train, validation or test (got '" + m.split + "')");
  }
  auto parts = split_corpus(corpus, m.seed);
  if (m.split == "train") return parts.train;
  if (m.split == "validation") return parts.validation;
  return parts.test;
}

EndpointFactory default_endpoint_factory() {
  return [](const std::string& url) { return make_http_endpoint(EndpointConfig::from_env(url)); };
}

namespace {

[[noreturn]] void rethrow_for(const std::string& id) {
  const auto prefix = "example '" + id + "': ";
  try {
    throw;
  } catch (const MalformedOutput& e) {
    throw MalformedOutput(prefix + e.what(), e.payload());
  } catch (const TransportError& e) {
    throw TransportError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  }
}

}  // namespace

SummarizeResult run_summarize(const RunManifest& manifest, const Corpus& full, const EndpointFactory& endpoints) {
  if (manifest.system.empty()) throw ConfigError("no system given");
  const auto spec = parse_system_spec(manifest.system);
  std::optional<SystemSpec> base;
  if (spec.kind == SystemSpec::Kind::decontext) {
    base = parse_system_spec(manifest.base);
    if (base->kind == SystemSpec::Kind::decontext || base->kind == SystemSpec::Kind::abstractive) {
      throw ConfigError("decontext base must be an extractive system, got '" + manifest.base + "'");
    }
  }
  const bool remote = spec.remote() || (base && base->remote());
  if (remote && manifest.endpoint.empty()) {
    throw ConfigError("system '" + manifest.system + "' needs an endpoint (--endpoint)");
  }
  if (manifest.jobs == 0) throw ConfigError("--jobs must be >= 1");
  const Corpus corpus = select_partition(full, manifest);
  if (corpus.empty()) throw DataError("nothing to summarize: the selected partition is empty");

  std::shared_ptr<Endpoint> endpoint = remote ? endpoints(manifest.endpoint) : nullptr;
  const auto sampled = sample_annotations(corpus, manifest.seed);

  SummarizeResult result;
  ScorerConfig scorer;
  const auto& extractive = base ? *base : spec;
  if (extractive.kind == SystemSpec::Kind::overlap) {
    if (manifest.threshold) {
      scorer.threshold = *manifest.threshold;
    } else if (!manifest.tune_corpus.empty()) {
      scorer.threshold = tune_threshold(load_corpus(manifest.tune_corpus), scorer);
    } else {
      const auto validation = split_corpus(full, manifest.seed).validation;
      if (validation.empty()) throw DataError("corpus too small to tune the overlap threshold; pass --threshold");
      scorer.threshold = tune_threshold(validation, scorer);
    }
    validate(scorer);
    result.threshold = scorer.threshold;
    spdlog::info("overlap threshold {}", scorer.threshold);
  }

  auto extract = [&](const SystemSpec& s, std::size_t i) -> SummaryCandidate {
    const auto& ex = corpus.examples[i];
    switch (s.kind) {
      case SystemSpec::Kind::lead: return lead_k(ex, s.k);
      case SystemSpec::Kind::overlap: return overlap_extract(ex, scorer);
      case SystemSpec::Kind::gold: return make_extractive(ex, "gold", ex.summary_annotations[sampled[i]]);
      case SystemSpec::Kind::external_extract: return external_extract(ex, *endpoint, s.include_question);
      default: break;
    }
    throw ConfigError("not an extractive system");
  };

  std::unique_ptr<DecontextBackend> backend;
  if (spec.kind == SystemSpec::Kind::decontext) {
    if (spec.backend == "external") backend = std::make_unique<EndpointBackend>(endpoint);
    else backend = std::make_unique<RuleBackend>();
  }
  AbstractiveConfig abstractive;
  abstractive.include_question = spec.include_question;
  abstractive.length_control = spec.length_control;

  std::vector<SummaryCandidate> out(corpus.size());
  std::vector<std::optional<DecontextResult>> edits(corpus.size());
  parallel_for(corpus.size(), manifest.jobs, [&](std::size_t i) {
    const auto& ex = corpus.examples[i];
    try {
      if (spec.kind == SystemSpec::Kind::decontext) {
        auto outcome = decontextualize(ex, extract(*base, i), *backend);
        out[i] = std::move(outcome.candidate);
        edits[i] = std::move(outcome.result);
      } else if (spec.kind == SystemSpec::Kind::abstractive) {
        out[i] = summarize_abstractive(ex, *endpoint, abstractive, ex.summary_annotations[sampled[i]]);
      } else {
        out[i] = extract(spec, i);
      }
    } catch (...) {
      rethrow_for(ex.id);
    }
  });

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return corpus.examples[a].id < corpus.examples[b].id; });
  for (auto i : order) {
    result.candidates.push_back(std::move(out[i]));
    if (edits[i]) result.decontext.push_back(std::move(*edits[i]));
  }
  return result;
}

EvalRow run_evaluate(const RunManifest& manifest, const Corpus& full, const std::vector<SummaryCandidate>& candidates,
                     const EndpointFactory& endpoints) {
  if (manifest.jobs == 0) throw ConfigError("--jobs must be >= 1");
  const Corpus corpus = select_partition(full, manifest);
  if (manifest.split == "all") {
    std::set<std::string> ids;
    for (const auto& ex : corpus.examples) ids.insert(ex.id);
    std::vector<std::string> unknown;
    for (const auto& c : candidates) {
      if (!ids.count(c.example_id)) unknown.push_back(c.example_id);
    }
    if (!unknown.empty()) {
      std::string list;
      for (std::size_t i = 0; i < unknown.size() && i < 20; ++i) list += (i ? ", " : "") + unknown[i];
      if (unknown.size() > 20) list += fmt::format(", ... ({} total)", unknown.size());
      throw DataError("candidates for ids not in the corpus: " + list);
    }
  }
  std::unique_ptr<EndpointEmbedder> embedder;
  if (!manifest.embed_endpoint.empty()) embedder = std::make_unique<EndpointEmbedder>(endpoints(manifest.embed_endpoint));
  return evaluate_system(corpus, candidates, embedder.get(), manifest.jobs);
}

Corpus ingest(std::istream& in) {
  Corpus corpus;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      if (!j.is_object()) throw DataError("record must be an object");
      if (j.contains("answer")) {
        if (j.contains("answer_sentences")) throw DataError("give either 'answer' or 'answer_sentences', not both");
        j["answer_sentences"] = split_sentences(j.at("answer").get<std::string>());
        j.erase("answer");
      }
      if (!j.contains("title")) j["title"] = nullptr;
      auto ex = example_from_json(j);
      if (!ids.insert(ex.id).second) throw DataError("duplicate id '" + ex.id + "'");
      corpus.examples.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw CorpusParseError(lineno, e.what());
    } catch (const CorpusParseError&) {
      throw;
    } catch (const DataError& e) {
      throw CorpusParseError(lineno, e.what());
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Command line

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Manifest fields as flags. A flag given on the command line beats the
/// manifest file, which beats the defaults.
struct ManifestFlags {
  std::string manifest;
  RunManifest flags;
  std::string output, text_output, candidates, tune_corpus, corpus;
  double threshold = 0;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app, const std::vector<std::string>& which) {
    app->add_option("--manifest", manifest, "JSON manifest; flags override it");
    auto want = [&](const char* name) { return std::find(which.begin(), which.end(), name) != which.end(); };
    opts["corpus"] = app->add_option("--corpus", corpus, "corpus JSONL");
    opts["seed"] = app->add_option("--seed", flags.seed, "seed for splits and annotation sampling");
    opts["split"] = app->add_option("--split", flags.split, "all | train | validation | test");
    opts["jobs"] = app->add_option("--jobs", flags.jobs, "parallel workers");
    opts["output"] = app->add_option("--output", output, "output path (stdout when absent)");
    if (want("system")) opts["system"] = app->add_option("--system", flags.system, "system spec");
    if (want("text_output")) opts["text_output"] = app->add_option("--text-output", text_output, "plain-text table path");
    if (want("candidates")) opts["candidates"] = app->add_option("--candidates", candidates, "candidates JSONL");
    if (want("tune_corpus")) opts["tune_corpus"] = app->add_option("--tune-corpus", tune_corpus, "corpus for tuning the overlap threshold");
    if (want("threshold")) opts["threshold"] = app->add_option("--threshold", threshold, "overlap threshold");
    if (want("base")) opts["base"] = app->add_option("--base", flags.base, "extractive base for decontext systems");
    if (want("endpoint")) opts["endpoint"] = app->add_option("--endpoint", flags.endpoint, "model endpoint URL");
    if (want("embed_endpoint")) opts["embed_endpoint"] = app->add_option("--embed-endpoint", flags.embed_endpoint, "embedding endpoint URL for BERTScore");
  }

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }

  RunManifest resolve() const {
    RunManifest m = manifest.empty() ? RunManifest{} : load_manifest(manifest);
    if (given("corpus")) m.corpus = corpus;
    if (given("seed")) m.seed = flags.seed;
    if (given("split")) m.split = flags.split;
    if (given("jobs")) m.jobs = flags.jobs;
    if (given("output")) m.output = output;
    if (given("system")) m.system = flags.system;
    if (given("text_output")) m.text_output = text_output;
    if (given("candidates")) m.candidates = candidates;
    if (given("tune_corpus")) m.tune_corpus = tune_corpus;
    if (given("threshold")) m.threshold = threshold;
    if (given("base")) m.base = flags.base;
    if (given("endpoint")) m.endpoint = flags.endpoint;
    if (given("embed_endpoint")) m.embed_endpoint = flags.embed_endpoint;
    if (m.corpus.empty()) throw ConfigError("no corpus given (--corpus)");
    return m;
  }
};

std::string candidates_jsonl(const std::vector<SummaryCandidate>& cands) {
  std::ostringstream out;
  write_candidates(out, cands);
  return out.str();
}

json to_json(const AnnotationRecord& r) {
  json j{{"assignment_id", r.assignment_id},
         {"annotator_id", r.annotator_id},
         {"example_id", r.example_id},
         {"variant", r.variant},
         {"assigned", r.assigned_ms},
         {"released", r.released}};
  if (r.stage1) {
    j["stage1"] = {{"fluency", to_string(r.stage1->fluency)},
                   {"adequacy", to_string(r.stage1->adequacy)},
                   {"time", r.stage1->time_ms}};
  }
  if (r.stage2) {
    j["stage2"] = {{"faithfulness", to_string(r.stage2->faithfulness)},
                   {"long_adequacy", to_string(r.stage2->long_adequacy)},
                   {"time", r.stage2->time_ms}};
  }
  return j;
}

std::vector<StudyItem> items_from_corpus(const Corpus& corpus, const std::vector<std::string>& variant_args,
                                         std::size_t sample, std::uint64_t seed) {
  std::map<std::string, std::map<std::string, std::string>> texts;  // example -> tag -> text
  std::map<std::string, const QAExample*> by_id;
  for (const auto& ex : corpus.examples) by_id[ex.id] = &ex;
  for (const auto& arg : variant_args) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--variant expects tag=candidates.jsonl, got '" + arg + "'");
    const auto tag = arg.substr(0, eq);
    for (const auto& c : load_candidates(arg.substr(eq + 1))) {
      auto it = by_id.find(c.example_id);
      if (it == by_id.end()) continue;
      texts[c.example_id][tag] = c.text_for(*it->second);
    }
  }
  std::vector<StudyItem> items;
  for (const auto& ex : corpus.examples) {
    auto it = texts.find(ex.id);
    if (it == texts.end() || it->second.size() != variant_args.size()) continue;
    items.push_back(StudyItem{ex.id, ex.question, ex.answer_text(), it->second, ex.answer_sentences});
  }
  if (sample > 0 && sample < items.size()) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = items.size() - 1; i > 0; --i) std::swap(items[i], items[uniform_index(rng, i + 1)]);
    items.resize(sample);
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.example_id < b.example_id; });
  }
  return items;
}

void add_study_commands(CLI::App& app) {
  auto* study = app.add_subcommand("study", "human evaluation study");
  study->require_subcommand(1);

  // create
  {
    auto* cmd = study->add_subcommand("create", "create a study log");
    struct Opts {
      std::string items, corpus, log, instructions;
      std::vector<std::string> variants;
      std::size_t annotators = 3, sample = 0;
      std::int64_t lease = 0;
      std::uint64_t seed = 0;
    };
    auto o = std::make_shared<Opts>();
    cmd->add_option("--items", o->items, "study items JSONL");
    cmd->add_option("--corpus", o->corpus, "corpus JSONL (with --variant)");
    cmd->add_option("--variant", o->variants, "tag=candidates.jsonl, repeatable");
    cmd->add_option("--sample", o->sample, "keep a seeded random sample of N items");
    cmd->add_option("--seed", o->seed, "sampling seed");
    cmd->add_option("--log", o->log, "study log to create")->required();
    cmd->add_option("--annotators", o->annotators, "annotators per (example, variant) cell");
    cmd->add_option("--lease", o->lease, "seconds before an unfinished assignment is released");
    cmd->add_option("--instructions", o->instructions, "JSON instructions passed to the annotation client");
    cmd->callback([o] {
      std::vector<StudyItem> items;
      if (!o->items.empty() == !o->corpus.empty()) throw ConfigError("give exactly one of --items or --corpus");
      if (!o->items.empty()) {
        std::ifstream in(o->items);
        if (!in) throw DataError("cannot read " + o->items);
        items = read_study_items(in);
      } else {
        if (o->variants.empty()) throw ConfigError("--corpus needs at least one --variant");
        items = items_from_corpus(load_corpus(o->corpus), o->variants, o->sample, o->seed);
      }
      StudyConfig config;
      config.annotators_per_cell = o->annotators;
      config.lease_seconds = o->lease;
      if (!o->instructions.empty()) {
        config.instructions = json::parse(read_file(o->instructions), nullptr, false);
        if (config.instructions.is_discarded()) throw ConfigError(o->instructions + " is not valid JSON");
      }
      auto s = Study::create(std::move(items), config, o->log);
      const auto snap = s->snapshot();
      std::cout << fmt::format("created {} with {} items, {} cells, {} required annotations\n", o->log,
                               snap.items.size(), snap.cell_count(), snap.required_annotations());
    });
  }
  // serve
  {
    auto* cmd = study->add_subcommand("serve", "serve the study wire API");
    struct Opts {
      std::string log;
      ServerOptions server;
    };
    auto o = std::make_shared<Opts>();
    cmd->add_option("--log", o->log, "study log")->required();
    cmd->add_option("--host", o->server.host, "bind address");
    cmd->add_option("--port", o->server.port, "port (0 picks one)");
    cmd->add_option("--token", o->server.bearer_token, "require this bearer token")->envname("STUDY_TOKEN");
    cmd->callback([o] {
      auto s = Study::open(o->log);
      StudyServer server(*s, o->server);
      const int port = server.bind();
      std::cout << fmt::format("serving {} on http://{}:{}\n", o->log, o->server.host, port) << std::flush;
      server.serve();
    });
  }
  // export
  {
    auto* cmd = study->add_subcommand("export", "export the annotation log");
    struct Opts {
      std::string log, output, format = "log";
    };
    auto o = std::make_shared<Opts>();
    cmd->add_option("--log", o->log, "study log")->required();
    cmd->add_option("--output", o->output, "output path (stdout when absent)");
    cmd->add_option("--format", o->format, "log | records")->check(CLI::IsMember({"log", "records"}));
    cmd->callback([o] {
      if (o->format == "log") {
        // Replay first so a corrupt log is reported rather than copied.
        load_study_log(std::filesystem::path(o->log));
        write_file(o->output, read_file(o->log));
        return;
      }
      std::string out;
      for (const auto& r : load_study_log(std::filesystem::path(o->log)).records) out += to_json(r).dump() + "\n";
      write_file(o->output, out);
    });
  }
  // report
  {
    auto* cmd = study->add_subcommand("report", "aggregate study results");
    struct Opts {
      std::string log, mode = "both", subset, json_out;
      std::vector<std::string> compare;
      bool partial = false;
    };
    auto o = std::make_shared<Opts>();
    cmd->add_option("--log", o->log, "study log")->required();
    cmd->add_option("--mode", o->mode, "both | per-response | majority");
    cmd->add_flag("--partial", o->partial, "aggregate incomplete cells");
    cmd->add_option("--subset", o->subset, "file of example ids, one per line");
    cmd->add_option("--json", o->json_out, "write the report as JSON");
    cmd->add_option("--compare", o->compare, "variant pair a,b for significance tests, repeatable");
    cmd->callback([o] {
      const auto snap = load_study_log(std::filesystem::path(o->log));
      ReportOptions opts;
      opts.partial = o->partial;
      if (!o->subset.empty()) {
        std::set<std::string> ids;
        std::istringstream in(read_file(o->subset));
        for (std::string line; std::getline(in, line);) {
          if (auto t = trim(line); !t.empty()) ids.emplace(t);
        }
        opts.subset = std::move(ids);
      }
      json out;
      if (o->mode == "both") {
        opts.mode = AggregationMode::per_response;
        auto per = aggregate_report(snap, opts);
        opts.mode = AggregationMode::majority;
        auto maj = aggregate_report(snap, opts);
        std::cout << render_study_report(per, maj);
        out = json{{"per-response", to_json(per)}, {"majority", to_json(maj)}};
      } else {
        opts.mode = parse_mode(o->mode);
        auto r = aggregate_report(snap, opts);
        std::cout << render_study_report(r, r);
        out = to_json(r);
      }
      for (const auto& pair : o->compare) {
        const auto comma = pair.find(',');
        if (comma == std::string::npos) throw ConfigError("--compare expects a,b");
        auto c = compare_variants(snap, pair.substr(0, comma), pair.substr(comma + 1));
        std::cout << fmt::format("{} vs {}: {} examples; adequacy t-test {}; functional McNemar {}/{} p={:.4f}\n", c.a,
                                 c.b, c.examples,
                                 c.adequacy ? fmt::format("t={:.3f} p={:.4f}", c.adequacy->t, c.adequacy->p)
                                            : std::string("degenerate"),
                                 c.functional_a_only, c.functional_b_only, c.mcnemar_p);
      }
      if (!o->json_out.empty()) write_file(o->json_out, out.dump(2) + "\n");
    });
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"lfqa: summarize long-form answers, evaluate summaries and run the annotation study"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace | debug | info | warn | error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error"}));
  app.parse_complete_callback([&] { spdlog::set_level(spdlog::level::from_str(log_level)); });

  // ingest
  {
    auto* cmd = app.add_subcommand("ingest", "validate and normalize a corpus");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--input", *in, "raw JSONL")->required();
    cmd->add_option("--output", *out, "normalized corpus JSONL (stdout when absent)");
    cmd->callback([in, out] {
      std::ifstream f(*in);
      if (!f) throw DataError("cannot read " + *in);
      auto corpus = ingest(f);
      std::ostringstream s;
      write_corpus(s, corpus);
      write_file(*out, s.str());
      spdlog::info("ingested {} examples", corpus.size());
      if (!out->empty()) std::cout << fmt::format("{} examples written to {}\n", corpus.size(), *out);
    });
  }
  // stats
  {
    auto* cmd = app.add_subcommand("stats", "corpus statistics");
    auto f = std::make_shared<ManifestFlags>();
    f->add(cmd, {});
    auto json_out = std::make_shared<std::string>();
    cmd->add_option("--json", *json_out, "also write the statistics as JSON");
    cmd->callback([f, json_out] {
      auto m = f->resolve();
      auto report = corpus_stats(select_partition(load_corpus(m.corpus), m), m.seed);
      write_file(m.output, render_stats(report));
      if (!json_out->empty()) write_file(*json_out, to_json(report).dump(2) + "\n");
    });
  }
  // split
  {
    auto* cmd = app.add_subcommand("split", "seeded train/validation/test split");
    auto f = std::make_shared<ManifestFlags>();
    f->add(cmd, {});
    auto dir = std::make_shared<std::string>();
    cmd->add_option("--out-dir", *dir, "directory for train/validation/test.jsonl")->required();
    cmd->callback([f, dir] {
      auto m = f->resolve();
      auto parts = split_corpus(load_corpus(m.corpus), m.seed);
      std::filesystem::create_directories(*dir);
      save_corpus(parts.train, std::filesystem::path(*dir) / "train.jsonl");
      save_corpus(parts.validation, std::filesystem::path(*dir) / "validation.jsonl");
      save_corpus(parts.test, std::filesystem::path(*dir) / "test.jsonl");
      std::cout << fmt::format("train {} validation {} test {}\n", parts.train.size(), parts.validation.size(),
                               parts.test.size());
    });
  }
  // summarize
  {
    auto* cmd = app.add_subcommand("summarize", "run a summarization system");
    auto f = std::make_shared<ManifestFlags>();
    f->add(cmd, {"system", "tune_corpus", "threshold", "base", "endpoint"});
    cmd->callback([f] {
      auto m = f->resolve();
      if (m.system.empty()) throw ConfigError("no system given (--system)");
      parse_system_spec(m.system);
      auto result = run_summarize(m, load_corpus(m.corpus));
      write_file(m.output, candidates_jsonl(result.candidates));
      if (!result.decontext.empty() || parse_system_spec(m.system).kind == SystemSpec::Kind::decontext) {
        auto st = edit_stats(result.decontext);
        std::cerr << fmt::format("gated {} of {}: Unnecessary {:.1f}% Infeasible {:.1f}% Done {:.1f}%{}\n", st.total,
                                 result.candidates.size(), st.unnecessary_pct, st.infeasible_pct, st.done_pct,
                                 st.length_increase ? fmt::format(" length +{:.0f}%", 100 * *st.length_increase) : "");
      }
    });
  }
  // evaluate
  {
    auto* cmd = app.add_subcommand("evaluate", "score candidates against the reference annotations");
    auto f = std::make_shared<ManifestFlags>();
    f->add(cmd, {"candidates", "text_output", "embed_endpoint"});
    auto human = std::make_shared<bool>(false);
    cmd->add_flag("--human", *human, "score the human upper bound instead of candidates");
    cmd->callback([f, human] {
      auto m = f->resolve();
      const auto corpus = load_corpus(m.corpus);
      EvalRow row;
      if (*human) {
        if (!m.candidates.empty()) throw ConfigError("--human and --candidates are exclusive");
        std::unique_ptr<EndpointEmbedder> embedder;
        if (!m.embed_endpoint.empty()) {
          embedder = std::make_unique<EndpointEmbedder>(default_endpoint_factory()(m.embed_endpoint));
        }
        row = human_upper_bound(select_partition(corpus, m), m.seed, embedder.get(), m.jobs);
      } else {
        if (m.candidates.empty()) throw ConfigError("no candidates given (--candidates)");
        row = run_evaluate(m, corpus, load_candidates(m.candidates));
      }
      std::vector<EvalRow> rows{row};
      std::ostringstream csv;
      write_report_csv(csv, rows);
      write_file(m.output, csv.str());
      const auto text = render_report_text(rows);
      if (!m.text_output.empty()) write_file(m.text_output, text);
      else if (!m.output.empty()) std::cout << text;
    });
  }
  // report
  {
    auto* cmd = app.add_subcommand("report", "merge evaluation reports");
    auto inputs = std::make_shared<std::vector<std::string>>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--input", *inputs, "report CSVs")->required();
    cmd->add_option("--output", *out, "merged CSV");
    cmd->callback([inputs, out] {
      std::vector<EvalRow> rows;
      for (const auto& path : *inputs) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot read " + path);
        for (auto& r : read_report_csv(in)) rows.push_back(std::move(r));
      }
      if (!out->empty()) {
        std::ostringstream csv;
        write_report_csv(csv, rows);
        write_file(*out, csv.str());
      }
      std::cout << render_report_text(rows);
    });
  }
  add_study_commands(app);

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const MalformedOutput& e) {
    std::cerr << "remote error: " << e.what() << "\n";
    if (!e.payload().empty()) std::cerr << "payload: " << e.payload().substr(0, 500) << "\n";
    return 3;
  } catch (const TransportError& e) {
    std::cerr << "remote error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace lfqa
