#include "lfqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "lfqa/parallel.hpp"

namespace lfqa {

namespace {

double harmonic(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

Prf prf(const IndexSet& pred, const IndexSet& ref) {
  if (ref.empty()) throw DataError("reference set is empty");
  std::size_t hit = 0;
  for (auto i : pred) hit += ref.count(i);
  Prf s;
  s.precision = pred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred.size());
  s.recall = static_cast<double>(hit) / static_cast<double>(ref.size());
  s.f1 = harmonic(s.precision, s.recall);
  return s;
}

bool exact_match(const IndexSet& pred, std::span<const IndexSet> refs) {
  return std::any_of(refs.begin(), refs.end(), [&](const IndexSet& r) { return r == pred; });
}

ClassificationScore best_ref_classification(const IndexSet& pred, std::span<const IndexSet> refs) {
  if (refs.empty()) throw DataError("no references to score against");
  ClassificationScore best;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const auto s = prf(pred, refs[k]);
    if (k == 0 || s.f1 > best.f1) {
      best.precision = s.precision;
      best.recall = s.recall;
      best.f1 = s.f1;
      best.chosen_ref = k;
    }
  }
  best.exact_match = exact_match(pred, refs);
  return best;
}

std::size_t lcs_len(const TokenList& a, const TokenList& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace {

double rouge_l_tokens(const TokenList& cand, const TokenList& ref) {
  if (cand.empty() || ref.empty()) {
    spdlog::warn("ROUGE-L on an empty {} scores 0", cand.empty() ? "candidate" : "reference");
    return 0.0;
  }
  const double lcs = static_cast<double>(lcs_len(cand, ref));
  return harmonic(lcs / static_cast<double>(cand.size()), lcs / static_cast<double>(ref.size()));
}

}  // namespace

double rouge_l_f1(std::string_view candidate, std::string_view reference) {
  return rouge_l_tokens(tokenize(candidate), tokenize(reference));
}

RougeScore rouge_best(std::string_view candidate, std::span<const std::string> refs) {
  if (refs.empty()) throw DataError("no references to score against");
  const auto cand = tokenize(candidate);
  RougeScore best;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const double f = rouge_l_tokens(cand, tokenize(refs[k]));
    if (k == 0 || f > best.rouge_l_f1) {
      best.rouge_l_f1 = f;
      best.chosen_ref = k;
    }
  }
  return best;
}

std::vector<std::vector<double>> EndpointEmbedder::embed(const TokenList& tokens) {
  const auto response = endpoint_->call(nlohmann::json{{"tokens", tokens}}, "embed");
  try {
    return response.at("vectors").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception&) {
    throw MalformedOutput("embedding response lacks a numeric 'vectors' array", response.dump());
  }
}

double bert_score_f1(std::string_view candidate, std::string_view reference, Embedder& embedder) {
  const auto cand = tokenize(candidate);
  const auto ref = tokenize(reference);
  if (cand.empty() || ref.empty()) {
    spdlog::warn("BERTScore on an empty {} scores 0", cand.empty() ? "candidate" : "reference");
    return 0.0;
  }
  auto cv = embedder.embed(cand);
  auto rv = embedder.embed(ref);
  if (cv.size() != cand.size() || rv.size() != ref.size()) {
    throw DataError("embedder returned a vector count that differs from the token count");
  }
  const std::size_t dim = cv.front().size();
  auto normalize = [dim](std::vector<std::vector<double>>& vs) {
    for (auto& v : vs) {
      if (v.size() != dim) throw DataError("embedding dimension mismatch");
      double norm = 0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 0) {
        for (double& x : v) x /= norm;
      }
    }
  };
  normalize(cv);
  normalize(rv);

  // sim[i][j] = cos(cand_i, ref_j)
  std::vector<double> best_for_cand(cv.size(), -1.0), best_for_ref(rv.size(), -1.0);
  for (std::size_t i = 0; i < cv.size(); ++i) {
    for (std::size_t j = 0; j < rv.size(); ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < dim; ++k) dot += cv[i][k] * rv[j][k];
      best_for_cand[i] = std::max(best_for_cand[i], dot);
      best_for_ref[j] = std::max(best_for_ref[j], dot);
    }
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  return harmonic(mean(best_for_cand), mean(best_for_ref));
}

namespace {

double sentence_count(const SummaryCandidate& c, const std::string& text) {
  if (!c.selected.empty()) return static_cast<double>(c.selected.size());
  return static_cast<double>(split_sentences(text).size());
}

std::map<std::string, const SummaryCandidate*> index_candidates(const Corpus& corpus,
                                                                 std::span<const SummaryCandidate> candidates) {
  std::map<std::string, const SummaryCandidate*> by_id;
  for (const auto& c : candidates) {
    if (!by_id.emplace(c.example_id, &c).second) throw DataError("duplicate candidate for example '" + c.example_id + "'");
  }
  std::vector<std::string> missing;
  for (const auto& ex : corpus.examples) {
    if (!by_id.count(ex.id)) missing.push_back(ex.id);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += fmt::format(", ... ({} total)", missing.size());
    throw DataError("no candidate for example ids: " + list);
  }
  return by_id;
}

std::vector<std::string> rendered_refs(const QAExample& ex) {
  std::vector<std::string> refs;
  for (const auto& a : ex.summary_annotations) refs.push_back(ex.render(a));
  return refs;
}

}  // namespace

LengthStats length_stats(const Corpus& corpus, std::span<const SummaryCandidate> candidates) {
  if (candidates.empty()) {
    spdlog::warn("length statistics over zero candidates");
    return {};
  }
  std::map<std::string, const QAExample*> examples;
  for (const auto& ex : corpus.examples) examples.emplace(ex.id, &ex);
  LengthStats out;
  for (const auto& c : candidates) {
    std::string text;
    if (c.summary_text) {
      text = *c.summary_text;
    } else if (auto it = examples.find(c.example_id); it != examples.end()) {
      text = it->second->render(c.selected);
    }
    if (text.empty()) spdlog::warn("candidate for '{}' has an empty summary", c.example_id);
    out.tokens += static_cast<double>(token_count(text));
    out.sentences += text.empty() ? 0.0 : sentence_count(c, text);
  }
  out.tokens /= static_cast<double>(candidates.size());
  out.sentences /= static_cast<double>(candidates.size());
  return out;
}

EvalRow evaluate_system(const Corpus& corpus, std::span<const SummaryCandidate> candidates, Embedder* embedder,
                        std::size_t jobs) {
  if (corpus.empty()) throw DataError("evaluation over an empty corpus");
  const auto by_id = index_candidates(corpus, candidates);

  const std::size_t n = corpus.size();
  std::vector<ClassificationScore> cls(n);
  std::vector<RougeScore> rouge(n);
  std::vector<SummaryCandidate> ordered(n);
  bool extractive = false;
  for (std::size_t i = 0; i < n; ++i) {
    ordered[i] = *by_id.at(corpus.examples[i].id);
    extractive = extractive || !ordered[i].selected.empty();
  }

  parallel_for(n, jobs, [&](std::size_t i) {
    const auto& ex = corpus.examples[i];
    const auto& cand = ordered[i];
    validate_candidate(cand, ex);
    cls[i] = best_ref_classification(cand.selected, ex.summary_annotations);
    const auto refs = rendered_refs(ex);
    const auto text = cand.text_for(ex);
    rouge[i] = rouge_best(text, refs);
    if (embedder) rouge[i].bert_score_f1 = bert_score_f1(text, refs[rouge[i].chosen_ref], *embedder);
  });

  EvalRow row;
  row.system = candidates.empty() ? std::string{} : candidates.front().system;
  row.examples = n;
  const double dn = static_cast<double>(n);
  if (extractive) {
    double p = 0, r = 0, f = 0, em = 0;
    for (const auto& s : cls) {
      p += s.precision;
      r += s.recall;
      f += s.f1;
      em += s.exact_match ? 1 : 0;
    }
    row.precision = p / dn;
    row.recall = r / dn;
    row.f1 = f / dn;
    row.em_pct = 100.0 * em / dn;
  }
  double rl = 0, bs = 0;
  for (const auto& s : rouge) {
    rl += s.rouge_l_f1;
    bs += s.bert_score_f1.value_or(0.0);
  }
  row.rouge_l = rl / dn;
  if (embedder) row.bert_score = bs / dn;
  const auto len = length_stats(corpus, ordered);
  row.tokens = len.tokens;
  row.sentences = len.sentences;
  return row;
}

EvalRow human_upper_bound(const Corpus& corpus, std::uint64_t seed, Embedder* embedder, std::size_t jobs) {
  if (corpus.empty()) throw DataError("evaluation over an empty corpus");
  const auto picks = sample_annotations(corpus, seed);
  const std::size_t n = corpus.size();
  std::vector<ClassificationScore> cls(n);
  std::vector<double> rouge(n, 0.0), bert(n, 0.0);
  std::vector<SummaryCandidate> chosen(n);

  parallel_for(n, jobs, [&](std::size_t i) {
    const auto& ex = corpus.examples[i];
    const auto& pred = ex.summary_annotations[picks[i]];
    std::vector<IndexSet> others;
    for (std::size_t k = 0; k < ex.summary_annotations.size(); ++k) {
      if (k != picks[i]) others.push_back(ex.summary_annotations[k]);
    }
    cls[i] = best_ref_classification(pred, others);
    const auto text = ex.render(pred);
    for (const auto& o : others) {
      const auto ref = ex.render(o);
      rouge[i] += rouge_l_f1(text, ref) / static_cast<double>(others.size());
      if (embedder) bert[i] += bert_score_f1(text, ref, *embedder) / static_cast<double>(others.size());
    }
    chosen[i] = make_extractive(ex, "human", pred);
  });

  EvalRow row;
  row.system = "human";
  row.examples = n;
  const double dn = static_cast<double>(n);
  double p = 0, r = 0, f = 0, em = 0, rl = 0, bs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    p += cls[i].precision;
    r += cls[i].recall;
    f += cls[i].f1;
    em += cls[i].exact_match ? 1 : 0;
    rl += rouge[i];
    bs += bert[i];
  }
  row.precision = p / dn;
  row.recall = r / dn;
  row.f1 = f / dn;
  row.em_pct = 100.0 * em / dn;
  row.rouge_l = rl / dn;
  if (embedder) row.bert_score = bs / dn;
  const auto len = length_stats(corpus, chosen);
  row.tokens = len.tokens;
  row.sentences = len.sentences;
  return row;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt_opt(const std::optional<double>& v, int digits) {
  return v ? fmt::format("{:.{}f}", *v, digits) : std::string{};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw DataError("report field '" + s + "' is not a number");
  }
}

}  // namespace

void write_report_csv(std::ostream& out, std::span<const EvalRow> rows) {
  out << kReportColumns << '\n';
  for (const auto& r : rows) {
    out << csv_field(r.system) << ',' << fmt_opt(r.precision, 4) << ',' << fmt_opt(r.recall, 4) << ','
        << fmt_opt(r.f1, 4) << ',' << fmt_opt(r.em_pct, 2) << ',' << fmt::format("{:.4f}", r.rouge_l) << ','
        << fmt_opt(r.bert_score, 4) << ',' << fmt::format("{:.2f}", r.tokens) << ','
        << fmt::format("{:.2f}", r.sentences) << '\n';
  }
}

std::vector<EvalRow> read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportColumns) throw DataError("report header is not '" + std::string(kReportColumns) + "'");
  std::vector<EvalRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) throw DataError("report row has " + std::to_string(f.size()) + " fields, expected 9");
    EvalRow r;
    r.system = f[0];
    r.precision = parse_opt(f[1]);
    r.recall = parse_opt(f[2]);
    r.f1 = parse_opt(f[3]);
    r.em_pct = parse_opt(f[4]);
    r.rouge_l = parse_opt(f[5]).value_or(0.0);
    r.bert_score = parse_opt(f[6]);
    r.tokens = parse_opt(f[7]).value_or(0.0);
    r.sentences = parse_opt(f[8]).value_or(0.0);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_report_text(std::span<const EvalRow> rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.system.size());
  auto dash = [](const std::optional<double>& v, int digits) {
    return v ? fmt::format("{:.{}f}", *v, digits) : std::string("-");
  };
  std::ostringstream out;
  out << fmt::format("{:<{}}  {:>6} {:>6} {:>6} {:>6}  {:>7} {:>9}  {:>14}\n", "system", width, "P", "R", "F1", "EM%",
                     "ROUGE-L", "BERTScore", "length");
  for (const auto& r : rows) {
    out << fmt::format("{:<{}}  {:>6} {:>6} {:>6} {:>6}  {:>7.3f} {:>9}  {:>14}\n", r.system, width,
                       dash(r.precision, 2), dash(r.recall, 2), dash(r.f1, 2), dash(r.em_pct, 1), r.rouge_l,
                       dash(r.bert_score, 3), fmt::format("{:.2f} ({:.2f})", r.tokens, r.sentences));
  }
  return out.str();
}

}  // namespace lfqa
