#include "lfqa/extract.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <regex>

#include <spdlog/spdlog.h>

#include "lfqa/metrics.hpp"
#include "lfqa/text.hpp"

namespace lfqa {

SummaryCandidate lead_k(const QAExample& example, std::size_t k) {
  if (k == 0) throw ConfigError("LEAD-k needs k >= 1");
  IndexSet sel;
  for (std::size_t i = 0; i < std::min(k, example.size()); ++i) sel.insert(i);
  return make_extractive(example, "lead" + std::to_string(k), std::move(sel));
}

void validate(const ScorerConfig& c) {
  for (double w : {c.overlap_weight, c.position_weight, c.length_weight}) {
    if (!std::isfinite(w)) throw ConfigError("scorer weights must be finite");
  }
  // +-inf are legitimate tuning results (select everything / argmax only).
  if (std::isnan(c.threshold)) throw ConfigError("scorer threshold must be a number");
}

std::vector<double> score_sentences(const QAExample& example, const ScorerConfig& config) {
  std::vector<double> scores;
  scores.reserve(example.size());
  for (std::size_t i = 0; i < example.size(); ++i) {
    const auto& s = example.answer_sentences[i];
    const double overlap = unigram_overlap(s, example.question);
    const double position = 1.0 / (1.0 + static_cast<double>(i));
    const double length = std::min(1.0, static_cast<double>(token_count(s)) / 30.0);
    scores.push_back(config.overlap_weight * overlap + config.position_weight * position +
                     config.length_weight * length);
  }
  return scores;
}

IndexSet select_by_threshold(std::span<const double> scores, double threshold) {
  IndexSet sel;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] >= threshold) sel.insert(i);
  }
  if (sel.empty() && !scores.empty()) {
    sel.insert(static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin()));
  }
  return sel;
}

double tune_threshold(const Corpus& validation, const ScorerConfig& config) {
  if (validation.empty()) throw DataError("threshold tuning needs a non-empty validation corpus");
  std::vector<std::vector<double>> all_scores;
  std::vector<double> candidates = {-std::numeric_limits<double>::infinity(),
                                    std::numeric_limits<double>::infinity()};
  for (const auto& ex : validation.examples) {
    all_scores.push_back(score_sentences(ex, config));
    candidates.insert(candidates.end(), all_scores.back().begin(), all_scores.back().end());
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  double best_theta = candidates.front();
  double best_f1 = -1.0;
  for (double theta : candidates) {
    double total = 0;
    for (std::size_t i = 0; i < validation.size(); ++i) {
      const auto pred = select_by_threshold(all_scores[i], theta);
      total += best_ref_classification(pred, validation.examples[i].summary_annotations).f1;
    }
    const double mean = total / static_cast<double>(validation.size());
    if (mean > best_f1) {
      best_f1 = mean;
      best_theta = theta;
    }
  }
  return best_theta;
}

SummaryCandidate overlap_extract(const QAExample& example, const ScorerConfig& config) {
  const auto scores = score_sentences(example, config);
  return make_extractive(example, "overlap", select_by_threshold(scores, config.threshold));
}

std::string encode_labeling_input(const QAExample& example, bool include_question) {
  std::string out = include_question ? example.question : std::string{};
  for (std::size_t i = 0; i < example.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += "[" + std::to_string(i + 1) + "] " + example.answer_sentences[i];
  }
  return out;
}

namespace {

bool positive_label(std::string_view raw) {
  std::string label;
  for (auto tok : tokenize(raw)) {
    label = tok;  // first token decides
    break;
  }
  return label == "summary" || label == "1" || label == "yes";
}

}  // namespace

DecodedLabels decode_labeling_output(std::string_view text, std::size_t n) {
  static const std::regex kMarker(R"(\[(\d+)\])");
  const std::string s(text);
  std::vector<std::pair<std::smatch::difference_type, std::smatch::difference_type>> spans;  // (start, end)
  std::vector<unsigned long long> numbers;
  for (std::sregex_iterator it(s.begin(), s.end(), kMarker), end; it != end; ++it) {
    spans.emplace_back(it->position(), it->position() + it->length());
    try {
      numbers.push_back(std::stoull((*it)[1].str()));
    } catch (const std::out_of_range&) {
      numbers.push_back(0);
    }
  }
  if (spans.empty()) throw MalformedOutput("labeling output has no [i] marker", s);

  DecodedLabels out;
  for (std::size_t m = 0; m < spans.size(); ++m) {
    const auto label_end = m + 1 < spans.size() ? spans[m + 1].first : static_cast<std::ptrdiff_t>(s.size());
    const std::string_view label(s.data() + spans[m].second, static_cast<std::size_t>(label_end - spans[m].second));
    if (numbers[m] < 1 || numbers[m] > n) {
      ++out.ignored_markers;
      continue;
    }
    if (positive_label(label)) out.selected.insert(static_cast<std::size_t>(numbers[m] - 1));
  }
  if (out.ignored_markers > 0) spdlog::warn("ignored {} out-of-range label marker(s)", out.ignored_markers);
  return out;
}

std::string render_labels(const IndexSet& selected, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += "[" + std::to_string(i + 1) + "] " + (selected.count(i) ? "summary" : "other");
  }
  return out;
}

SummaryCandidate external_extract(const QAExample& example, Endpoint& client, bool include_question) {
  const auto input = encode_labeling_input(example, include_question);
  const auto output = call_for_text(client, nlohmann::json{{"input", input}}, "output", example.id);
  auto decoded = decode_labeling_output(output, example.size());
  if (decoded.selected.empty()) decoded.selected.insert(0);
  return make_extractive(example, include_question ? "external-extract:q+a" : "external-extract:a",
                         std::move(decoded.selected));
}

}  // namespace lfqa
