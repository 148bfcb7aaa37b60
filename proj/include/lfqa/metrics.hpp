#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lfqa/candidate.hpp"
#include "lfqa/corpus.hpp"
#include "lfqa/endpoint.hpp"
#include "lfqa/text.hpp"

namespace lfqa {

// Classification scores treat summary sentences as the positive class.

struct Prf {
  double precision = 0, recall = 0, f1 = 0;
};

/// Throws DataError when `ref` is empty.
Prf prf(const IndexSet& pred, const IndexSet& ref);

struct ClassificationScore {
  double precision = 0, recall = 0, f1 = 0;
  bool exact_match = false;
  std::size_t chosen_ref = 0;
};

/// Max-F1 reference, lowest index on ties.
ClassificationScore best_ref_classification(const IndexSet& pred, std::span<const IndexSet> refs);

/// True when pred equals at least one reference as a set.
bool exact_match(const IndexSet& pred, std::span<const IndexSet> refs);

std::size_t lcs_len(const TokenList& a, const TokenList& b);

/// ROUGE-L F1 (beta = 1) over `tokenize` tokens. 0 when either side is empty.
double rouge_l_f1(std::string_view candidate, std::string_view reference);

struct RougeScore {
  double rouge_l_f1 = 0;
  std::size_t chosen_ref = 0;
  std::optional<double> bert_score_f1;
};

/// Highest ROUGE-L F1 across references; the winner is kept for BERTScore.
RougeScore rouge_best(std::string_view candidate, std::span<const std::string> refs);

/// Per-token vectors for BERTScore greedy matching.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<double>> embed(const TokenList& tokens) = 0;
};

/// Embedding endpoint: {"tokens": [...]} -> {"vectors": [[...], ...]}.
class EndpointEmbedder final : public Embedder {
 public:
  explicit EndpointEmbedder(std::shared_ptr<Endpoint> endpoint) : endpoint_(std::move(endpoint)) {}
  std::vector<std::vector<double>> embed(const TokenList& tokens) override;

 private:
  std::shared_ptr<Endpoint> endpoint_;
};

/// Greedy cosine-matching F1. Throws DataError on vector count or dimension
/// mismatch; provider errors propagate.
double bert_score_f1(std::string_view candidate, std::string_view reference, Embedder& embedder);

struct LengthStats {
  double tokens = 0;
  double sentences = 0;
};

/// Sentences come from the selected set when present, else from splitting
/// the summary text.
LengthStats length_stats(const Corpus& corpus, std::span<const SummaryCandidate> candidates);

/// One row of an evaluation report. Classification fields are absent for
/// systems that select no sentences (abstractive output).
struct EvalRow {
  std::string system;
  std::size_t examples = 0;
  std::optional<double> precision, recall, f1, em_pct;
  double rouge_l = 0;
  std::optional<double> bert_score;
  double tokens = 0, sentences = 0;
};

/// One sampled annotation per example scored against the other two:
/// max-F1 for classification, pairwise mean for ROUGE-L and BERTScore.
EvalRow human_upper_bound(const Corpus& corpus, std::uint64_t seed, Embedder* embedder = nullptr,
                          std::size_t jobs = 1);

/// Exactly one candidate per corpus example is required; missing ids are
/// listed in the thrown DataError.
EvalRow evaluate_system(const Corpus& corpus, std::span<const SummaryCandidate> candidates,
                        Embedder* embedder = nullptr, std::size_t jobs = 1);

inline constexpr const char* kReportColumns = "system,P,R,F1,EM_pct,ROUGE_L,BERTScore,tokens,sentences";

void write_report_csv(std::ostream& out, std::span<const EvalRow> rows);
std::vector<EvalRow> read_report_csv(std::istream& in);
std::string render_report_text(std::span<const EvalRow> rows);

}  // namespace lfqa
