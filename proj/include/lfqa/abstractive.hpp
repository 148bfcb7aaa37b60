#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "lfqa/candidate.hpp"
#include "lfqa/corpus.hpp"
#include "lfqa/endpoint.hpp"

namespace lfqa {

struct AbstractiveConfig {
  bool length_control = false;
  bool include_question = true;
  int max_output_tokens = 512;
  double temperature = 0.0;

  /// "q+a", "a+l", "q+a+l", ...
  std::string tag() const;
};

/// Throws ConfigError for max_output_tokens <= 0 or a negative temperature.
void validate(const AbstractiveConfig& config);

/// "Q: {question} A: {answer} Summarize the above answer[ in N sentences|.]"
/// where N = |gold|. Throws ConfigError when length control lacks a gold set.
std::string build_prompt(const QAExample& example, const std::optional<IndexSet>& gold, const AbstractiveConfig& config);

/// Repeatedly drops the leading sentence while its unigram overlap with the
/// question exceeds 0.75, never dropping the last remaining sentence.
std::string strip_question_echo(std::string_view summary, std::string_view question);

inline constexpr double kEchoOverlap = 0.75;

/// Generation endpoint: {"prompt", "max_tokens", "temperature"} -> {"text"}.
/// `gold` feeds the length-control prompt.
SummaryCandidate summarize_abstractive(const QAExample& example, Endpoint& client, const AbstractiveConfig& config,
                                       const std::optional<IndexSet>& gold = std::nullopt);

}  // namespace lfqa
