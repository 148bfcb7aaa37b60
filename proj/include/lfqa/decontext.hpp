#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lfqa/candidate.hpp"
#include "lfqa/corpus.hpp"
#include "lfqa/endpoint.hpp"

namespace lfqa {

enum class DecontextCategory { Done, Unnecessary, Infeasible };

std::string to_string(DecontextCategory c);

/// Title plus the full paragraph, with one target sentence to rewrite.
struct DecontextRequest {
  std::string title;
  std::vector<std::string> sentences;
  std::size_t target_index = 0;
};

/// Throws DataError for an empty title or out-of-range target.
void validate(const DecontextRequest& request);

struct DecontextResult {
  DecontextCategory category = DecontextCategory::Unnecessary;
  std::string text;      // rewritten sentence on Done, else the original
  bool edited = false;   // category == Done
  std::string original;  // the target sentence as given
  std::string payload;   // text after [SEP] as returned by the rewriter
  /// Byte range of `original` that the rule-based rewriter replaced.
  std::optional<std::pair<std::size_t, std::size_t>> replaced_span;
};

/// min(selected) when sentence 0 is not selected, else none. Throws DataError
/// for an empty selection.
std::optional<std::size_t> should_decontextualize(const IndexSet& selected);

/// Page title when the example has one, else the question.
std::string title_for(const QAExample& example);

/// "[CLS] t [s] pre-context [s] target [s] post-context [s]". An empty
/// context segment is dropped together with one of its separators.
std::string serialize_request(const DecontextRequest& request);

/// Parses "CATEGORY [SEP] y". Non-Done categories keep `original` as text.
/// Throws MalformedOutput on a missing separator or unknown category.
DecontextResult parse_response(std::string_view response, std::string_view original);

/// Offline rewriter: substitutes a sentence-initial anaphor (or a final
/// locative "there") with the single compatible noun phrase from the nearest
/// preceding sentence that has one, or with that sentence's subject when it
/// opens with a compatible phrase. With no candidate in the paragraph the
/// title's first compatible phrase is used.
DecontextResult rule_based_decontext(const DecontextRequest& request);

class DecontextBackend {
 public:
  virtual ~DecontextBackend() = default;
  virtual DecontextResult rewrite(const DecontextRequest& request, std::string_view request_id) = 0;
  virtual std::string name() const = 0;
};

class RuleBackend final : public DecontextBackend {
 public:
  DecontextResult rewrite(const DecontextRequest& request, std::string_view) override {
    return rule_based_decontext(request);
  }
  std::string name() const override { return "rules"; }
};

/// Decontextualizer endpoint: {"input": serialized} -> {"output": "CATEGORY [SEP] y"}.
class EndpointBackend final : public DecontextBackend {
 public:
  explicit EndpointBackend(std::shared_ptr<Endpoint> endpoint) : endpoint_(std::move(endpoint)) {}
  DecontextResult rewrite(const DecontextRequest& request, std::string_view request_id) override;
  std::string name() const override { return "external"; }

 private:
  std::shared_ptr<Endpoint> endpoint_;
};

struct DecontextOutcome {
  SummaryCandidate candidate;
  std::optional<DecontextResult> result;  // none when gating did not fire
};

/// Gates, rewrites the first summary sentence and splices it into the
/// summary text. Selected indices never change. A failing backend degrades
/// to the rule-based rewriter, and that to Unnecessary.
DecontextOutcome decontextualize(const QAExample& example, const SummaryCandidate& base, DecontextBackend& backend);

struct EditStats {
  double unnecessary_pct = 0, infeasible_pct = 0, done_pct = 0;
  /// Mean of (len(new) - len(old)) / len(old) in tokens over Done results.
  std::optional<double> length_increase;
  std::size_t total = 0;
};

EditStats edit_stats(std::span<const DecontextResult> results);

}  // namespace lfqa
