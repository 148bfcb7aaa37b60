#include "lfqa/abstractive.hpp"

#include "lfqa/text.hpp"

namespace lfqa {

std::string AbstractiveConfig::tag() const {
  std::string t = include_question ? "q+a" : "a";
  if (length_control) t += "+l";
  return t;
}

void validate(const AbstractiveConfig& config) {
  if (config.max_output_tokens <= 0) throw ConfigError("max_output_tokens must be positive");
  if (!(config.temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
}

std::string build_prompt(const QAExample& example, const std::optional<IndexSet>& gold,
                         const AbstractiveConfig& config) {
  if (config.length_control && (!gold || gold->empty())) {
    throw ConfigError("length-controlled prompt for '" + example.id + "' needs the gold summary");
  }
  std::string prompt;
  if (config.include_question) prompt = "Q: " + example.question + " A: ";
  prompt += example.answer_text() + " ";
  if (config.length_control) {
    prompt += "Summarize the above answer in " + std::to_string(gold->size()) + " sentences";
  } else {
    prompt += "Summarize the above answer.";
  }
  return prompt;
}

std::string strip_question_echo(std::string_view summary, std::string_view question) {
  auto spans = sentence_spans(summary);
  std::size_t first = 0;
  while (spans.size() - first > 1) {
    const auto [b, e] = spans[first];
    if (unigram_overlap(summary.substr(b, e - b), question) <= kEchoOverlap) break;
    ++first;
  }
  if (first == 0) return std::string(summary);
  return std::string(trim(summary.substr(spans[first].first)));
}

SummaryCandidate summarize_abstractive(const QAExample& example, Endpoint& client, const AbstractiveConfig& config,
                                       const std::optional<IndexSet>& gold) {
  validate(config);
  const nlohmann::json request{{"prompt", build_prompt(example, gold, config)},
                               {"max_tokens", config.max_output_tokens},
                               {"temperature", config.temperature}};
  std::string text(trim(call_for_text(client, request, "text", example.id)));
  if (config.include_question) text = strip_question_echo(text, example.question);
  SummaryCandidate c;
  c.example_id = example.id;
  c.system = "abstractive:" + config.tag();
  c.summary_text = std::move(text);
  return c;
}

}  // namespace lfqa
