#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfqa/candidate.hpp"
#include "lfqa/corpus.hpp"
#include "lfqa/decontext.hpp"
#include "lfqa/endpoint.hpp"
#include "lfqa/metrics.hpp"

namespace lfqa {

/// A parsed system spec.
///   lead<k>                  first k sentences
///   overlap                  question-overlap scorer
///   gold                     one sampled reference annotation
///   external-extract[:q+a|:a]
///   decontext:rules|external  applied on top of RunManifest::base
///   abstractive:<flags>      flags from {q, a, l} joined by '+', 'a' required
struct SystemSpec {
  enum class Kind { lead, overlap, gold, external_extract, decontext, abstractive };
  Kind kind = Kind::lead;
  std::size_t k = 2;
  bool include_question = true;
  bool length_control = false;
  std::string backend;  // decontext only

  bool remote() const;
};

/// Throws ConfigError naming the bad spec.
SystemSpec parse_system_spec(const std::string& spec);

struct RunManifest {
  std::filesystem::path corpus;
  std::uint64_t seed = 0;
  std::string system;
  std::string split = "all";  // all | train | validation | test
  std::filesystem::path output;
  std::filesystem::path text_output;
  std::filesystem::path candidates;
  std::filesystem::path tune_corpus;
  std::optional<double> threshold;
  std::string base = "gold";
  std::string endpoint;
  std::string embed_endpoint;
  std::size_t jobs = 1;
};

/// Keys mirror the long flag names with '-' replaced by '_'. Unknown keys
/// are rejected.
RunManifest manifest_from_json(const nlohmann::json& j);
RunManifest load_manifest(const std::filesystem::path& path);

/// The partition named by manifest.split, or the whole corpus.
Corpus select_partition(const Corpus& corpus, const RunManifest& manifest);

using EndpointFactory = std::function<std::shared_ptr<Endpoint>(const std::string& url)>;

/// HTTP with retries; bearer token from MODEL_API_KEY.
EndpointFactory default_endpoint_factory();

struct SummarizeResult {
  std::vector<SummaryCandidate> candidates;  // sorted by example id
  std::vector<DecontextResult> decontext;    // gated examples only, same order
  std::optional<double> threshold;           // overlap only
};

/// Runs manifest.system over the selected partition. Remote systems without
/// an endpoint fail with ConfigError before any work. Errors from one
/// example are rethrown with its id.
SummarizeResult run_summarize(const RunManifest& manifest, const Corpus& corpus,
                              const EndpointFactory& endpoints = default_endpoint_factory());

/// Scores candidates on the selected partition. Candidates for ids outside
/// it are an error when the whole corpus is evaluated.
EvalRow run_evaluate(const RunManifest& manifest, const Corpus& corpus,
                     const std::vector<SummaryCandidate>& candidates,
                     const EndpointFactory& endpoints = default_endpoint_factory());

/// Corpus records may carry "answer" (one string, split into sentences)
/// instead of "answer_sentences", and may omit "title".
Corpus ingest(std::istream& in);

/// Entry point for the `lfqa` binary. Returns the process exit code:
/// 0 ok, 1 usage or configuration, 2 data, 3 remote endpoint.
int run_cli(int argc, const char* const* argv);

}  // namespace lfqa
