#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfqa/corpus.hpp"

namespace lfqa {

/// One system's output for one example. Extractive systems fill `selected`;
/// abstractive systems leave it empty and fill `summary_text`.
struct SummaryCandidate {
  std::string example_id;
  std::string system;
  IndexSet selected;
  std::optional<std::string> summary_text;
  std::optional<std::string> decontext_category;  // set by the decontext stage

  /// summary_text when present, else the selected sentences rendered in order.
  std::string text_for(const QAExample& example) const;

  friend bool operator==(const SummaryCandidate&, const SummaryCandidate&) = default;
};

/// Candidate for `selected` with summary_text rendered from the example.
SummaryCandidate make_extractive(const QAExample& example, std::string system, IndexSet selected);

/// Throws DataError when an index falls outside the example or the summary
/// text disagrees with the selected sentences (pre-decontextualization).
void validate_candidate(const SummaryCandidate& candidate, const QAExample& example);

nlohmann::json to_json(const SummaryCandidate& candidate);
SummaryCandidate candidate_from_json(const nlohmann::json& record);

/// JSONL, one candidate per line.
std::vector<SummaryCandidate> read_candidates(std::istream& in);
std::vector<SummaryCandidate> load_candidates(const std::filesystem::path& path);
void write_candidates(std::ostream& out, const std::vector<SummaryCandidate>& candidates);

}  // namespace lfqa
