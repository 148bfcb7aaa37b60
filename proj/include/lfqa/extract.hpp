#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lfqa/candidate.hpp"
#include "lfqa/corpus.hpp"
#include "lfqa/endpoint.hpp"

namespace lfqa {

/// First min(k, n) sentences. Throws ConfigError when k == 0.
SummaryCandidate lead_k(const QAExample& example, std::size_t k);

/// Weights of the heuristic sentence scorer and its selection threshold.
struct ScorerConfig {
  double overlap_weight = 1.0;
  double position_weight = 0.5;
  double length_weight = 0.1;
  double threshold = 0.5;
};

/// Throws ConfigError for non-finite weights or a NaN threshold.
void validate(const ScorerConfig& config);

/// score_i = w_overlap * overlap(a_i, q) + w_pos / (1 + i) + w_len * min(1, |a_i| / 30)
std::vector<double> score_sentences(const QAExample& example, const ScorerConfig& config);

/// {i : score_i >= threshold}, or {argmax} (lowest index) when that is empty.
IndexSet select_by_threshold(std::span<const double> scores, double threshold);

/// Sweeps the threshold over every observed score plus -inf/+inf and keeps
/// the one maximizing mean best-reference F1; the lowest wins ties.
double tune_threshold(const Corpus& validation, const ScorerConfig& config);

/// Heuristic scorer applied with config.threshold.
SummaryCandidate overlap_extract(const QAExample& example, const ScorerConfig& config);

/// "q [1] a1 [2] a2 ... [n] an", without the leading question when
/// include_question is false.
std::string encode_labeling_input(const QAExample& example, bool include_question);

struct DecodedLabels {
  IndexSet selected;
  std::size_t ignored_markers = 0;  // markers outside [1, n]
};

/// Parses "[i] label" pairs. Labels "summary", "1" or "yes" (any case) mark
/// sentence i-1. Throws MalformedOutput when no marker is present.
DecodedLabels decode_labeling_output(std::string_view text, std::size_t n);

/// The decoder's canonical input for a label set.
std::string render_labels(const IndexSet& selected, std::size_t n);

/// Labeling endpoint: {"input": ...} -> {"output": ...}. An empty decoded
/// set falls back to LEAD-1.
SummaryCandidate external_extract(const QAExample& example, Endpoint& client, bool include_question);

}  // namespace lfqa
