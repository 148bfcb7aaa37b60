#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "lfqa/metrics.hpp"
#include "support.hpp"

using namespace lfqa;
using namespace lfqa::testing;
using nlohmann::json;

namespace {

/// Orthogonal unit vector per token type.
class OneHotEmbedder final : public Embedder {
 public:
  std::vector<std::vector<double>> embed(const TokenList& tokens) override {
    std::vector<std::vector<double>> out;
    for (const auto& t : tokens) {
      auto [it, fresh] = ids_.emplace(t, ids_.size());
      (void)fresh;
      std::vector<double> v(kDim, 0.0);
      v.at(it->second) = 1.0;
      out.push_back(std::move(v));
    }
    return out;
  }

 private:
  static constexpr std::size_t kDim = 256;
  std::map<std::string, std::size_t> ids_;
};

// Token-level unigram F1 with each side matched against the other's types.
double unigram_f1(const std::string& cand, const std::string& ref) {
  const auto c = tokenize(cand), r = tokenize(ref);
  if (c.empty() || r.empty()) return 0.0;
  const std::set<std::string> ct(c.begin(), c.end()), rt(r.begin(), r.end());
  double hp = 0, hr = 0;
  for (const auto& t : c) hp += rt.count(t);
  for (const auto& t : r) hr += ct.count(t);
  const double p = hp / static_cast<double>(c.size()), rec = hr / static_cast<double>(r.size());
  return p + rec > 0 ? 2 * p * rec / (p + rec) : 0.0;
}

// Longest common subsequence by enumerating every subsequence of `a`.
std::size_t brute_lcs(const TokenList& a, const TokenList& b) {
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
    TokenList sub;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (mask & (1u << i)) sub.push_back(a[i]);
    }
    std::size_t j = 0;
    for (const auto& t : b) {
      if (j < sub.size() && sub[j] == t) ++j;
    }
    if (j == sub.size()) best = std::max(best, sub.size());
  }
  return best;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("prf") {
  auto id = prf({1}, {1});
  CHECK(id.precision == 1.0);
  CHECK(id.recall == 1.0);
  CHECK(id.f1 == 1.0);
  auto dis = prf({1, 2}, {3});
  CHECK(dis.f1 == 0.0);
  CHECK(dis.precision == 0.0);
  auto part = prf({1, 2}, {1, 2, 4});
  CHECK(part.precision == doctest::Approx(1.0));
  CHECK(part.recall == doctest::Approx(2.0 / 3.0));
  CHECK(part.f1 == doctest::Approx(0.8));
  CHECK(prf({}, {1}).precision == 0.0);
  CHECK_THROWS_AS(prf({1}, {}), DataError);
}

TEST_CASE("best reference classification") {
  std::vector<IndexSet> refs{{0}, {0, 2}, {1}};
  auto s = best_ref_classification({0, 2}, refs);
  CHECK(s.f1 == 1.0);
  CHECK(s.chosen_ref == 1);
  CHECK(s.exact_match);

  std::vector<IndexSet> same{{1}, {1}, {1}};
  CHECK(best_ref_classification({1}, same).chosen_ref == 0);
  auto none = best_ref_classification({5}, refs);
  CHECK(none.f1 == 0.0);
  CHECK(none.chosen_ref == 0);
  CHECK_FALSE(none.exact_match);
}

TEST_CASE("exact match is set equality against any reference") {
  std::vector<IndexSet> refs{{1}, {1, 2, 3}, {0, 1}};
  CHECK(exact_match({1}, refs));
  CHECK(exact_match(IndexSet{2, 1, 3}, refs));
  CHECK_FALSE(exact_match({3}, std::vector<IndexSet>{{1, 3}, {2, 3}, {0, 3}}));
}

TEST_CASE("classification bounds and the max property") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 3 + rng() % 13;
    std::vector<IndexSet> refs{random_subset(rng, n), random_subset(rng, n), random_subset(rng, n)};
    IndexSet pred = rng() % 5 ? random_subset(rng, n) : refs[rng() % 3];
    auto best = best_ref_classification(pred, refs);
    for (const auto& r : refs) {
      auto s = prf(pred, r);
      CHECK(s.precision >= 0.0);
      CHECK(s.precision <= 1.0);
      CHECK(s.recall >= 0.0);
      CHECK(s.recall <= 1.0);
      CHECK(s.f1 >= 0.0);
      CHECK(s.f1 <= 1.0);
      CHECK(best.f1 >= s.f1);
    }
    if (best.exact_match) CHECK(best.f1 == 1.0);
    CHECK(prf(refs[0], refs[0]).f1 == 1.0);
  }
}

TEST_CASE("lcs") {
  CHECK(lcs_len({"a", "b", "c", "d"}, {"a", "b", "c", "d"}) == 4);
  CHECK(lcs_len({"a", "b"}, {"c", "d"}) == 0);
  CHECK(lcs_len({"a", "b", "c"}, {"a", "c", "d"}) == 2);
  CHECK(lcs_len({}, {"a"}) == 0);
}

TEST_CASE("lcs matches brute force up to length eight") {
  std::mt19937_64 rng(99);
  const TokenList alphabet{"a", "b", "c"};
  for (int trial = 0; trial < 3000; ++trial) {
    TokenList a(rng() % 9), b(rng() % 9);
    for (auto& t : a) t = alphabet[rng() % 3];
    for (auto& t : b) t = alphabet[rng() % 3];
    CHECK(lcs_len(a, b) == brute_lcs(a, b));
  }
}

TEST_CASE("rouge-l") {
  CHECK(rouge_l_f1("the cat sat", "the cat sat") == doctest::Approx(1.0));
  CHECK(rouge_l_f1("a b", "c d") == 0.0);
  CHECK(rouge_l_f1("a b c", "a c d") == doctest::Approx(2.0 / 3.0));
  CHECK(rouge_l_f1("", "a") == 0.0);
  std::vector<std::string> refs{"x y", "p q", "a b c"};
  auto best = rouge_best("a b c", refs);
  CHECK(best.chosen_ref == 2);
  CHECK(best.rouge_l_f1 == doctest::Approx(1.0));
}

TEST_CASE("rouge-l is symmetric and reflexive") {
  std::mt19937_64 rng(6);
  const std::vector<std::string> words{"a", "b", "c", "d"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string x, y;
    const std::size_t n = 1 + rng() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      x += words[rng() % 4] + " ";
      y += words[rng() % 4] + " ";
    }
    CHECK(rouge_l_f1(x, x) == doctest::Approx(1.0));
    CHECK(rouge_l_f1(x, y) == doctest::Approx(rouge_l_f1(y, x)));
  }
}

TEST_CASE("bertscore with one-hot embeddings") {
  OneHotEmbedder e;
  CHECK(bert_score_f1("a b", "a c", e) == doctest::Approx(0.5));
  CHECK(bert_score_f1("the same words", "the same words", e) == doctest::Approx(1.0));
  CHECK(bert_score_f1("", "a", e) == 0.0);
}

TEST_CASE("one-hot bertscore equals unigram F1") {
  std::mt19937_64 rng(8);
  const std::vector<std::string> words{"sun", "heat", "air", "the", "moves", "light"};
  OneHotEmbedder e;
  for (int trial = 0; trial < 300; ++trial) {
    std::string x, y;
    for (std::size_t i = 0, n = 1 + rng() % 8; i < n; ++i) x += words[rng() % words.size()] + " ";
    for (std::size_t i = 0, n = 1 + rng() % 8; i < n; ++i) y += words[rng() % words.size()] + " ";
    CHECK(bert_score_f1(x, y, e) == doctest::Approx(unigram_f1(x, y)));
  }
}

TEST_CASE("embedding provider contract") {
  auto ok = std::make_shared<FunctionEndpoint>([](const json& req, std::string_view) {
    json vectors = json::array();
    for (std::size_t i = 0; i < req.at("tokens").size(); ++i) vectors.push_back({1.0, 0.0});
    return json{{"vectors", vectors}};
  });
  EndpointEmbedder emb(ok);
  CHECK(bert_score_f1("a b", "c", emb) == doctest::Approx(1.0));

  auto short_reply = std::make_shared<FunctionEndpoint>([](const json&, std::string_view) {
    return json{{"vectors", json::array({json::array({1.0})})}};
  });
  EndpointEmbedder bad(short_reply);
  CHECK_THROWS(bert_score_f1("a b", "c d", bad));

  auto down = std::make_shared<FunctionEndpoint>([](const json&, std::string_view) -> json { throw TransportError("x"); });
  EndpointEmbedder failing(down);
  CHECK_THROWS_AS(bert_score_f1("a", "b", failing), TransportError);
}

TEST_CASE("length statistics") {
  auto ex = small_example("l");
  std::vector<SummaryCandidate> cands{make_extractive(ex, "s", {0, 1})};
  auto st = length_stats(make_corpus({ex}), cands);
  CHECK(st.tokens == doctest::Approx(6.0));
  CHECK(st.sentences == doctest::Approx(2.0));

  SummaryCandidate ten{"a", "abs", {}, std::string("w w w w w w w w w w"), {}};
  SummaryCandidate twenty = ten;
  twenty.summary_text = *ten.summary_text + " " + *ten.summary_text;
  std::vector<SummaryCandidate> two{ten, twenty};
  CHECK(length_stats(Corpus{}, two).tokens == doctest::Approx(15.0));

  SummaryCandidate empty{"e", "abs", {}, std::string{}, {}};
  std::vector<SummaryCandidate> one{empty};
  auto z = length_stats(Corpus{}, one);
  CHECK(z.tokens == 0.0);
  CHECK(z.sentences == 0.0);
}

TEST_CASE("gold replay scores perfectly") {
  std::mt19937_64 rng(10);
  auto c = random_corpus(rng, 20);
  std::vector<SummaryCandidate> cands;
  for (const auto& ex : c.examples) cands.push_back(make_extractive(ex, "gold", ex.summary_annotations[rng() % 3]));
  auto row = evaluate_system(c, cands, nullptr, 3);
  CHECK(*row.f1 == doctest::Approx(1.0));
  CHECK(*row.em_pct == doctest::Approx(100.0));
  CHECK(row.rouge_l == doctest::Approx(1.0));
  CHECK(row.system == "gold");
  CHECK_FALSE(row.bert_score.has_value());
}

TEST_CASE("evaluation errors") {
  CHECK_THROWS_AS(evaluate_system(Corpus{}, {}, nullptr), DataError);
  auto c = make_corpus({small_example("a"), small_example("b")});
  std::vector<SummaryCandidate> one{make_extractive(c.examples[0], "x", {0})};
  try {
    evaluate_system(c, one, nullptr);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("b") != std::string::npos);
  }
}

TEST_CASE("abstractive rows omit classification") {
  auto ex = small_example("a");
  SummaryCandidate c{"a", "abstractive:q+a", {}, std::string("First sentence here."), {}};
  std::vector<SummaryCandidate> cands{c};
  OneHotEmbedder e;
  auto row = evaluate_system(make_corpus({ex}), cands, &e);
  CHECK_FALSE(row.f1.has_value());
  CHECK_FALSE(row.em_pct.has_value());
  CHECK(row.rouge_l == doctest::Approx(1.0));
  CHECK(*row.bert_score == doctest::Approx(1.0));
}

TEST_CASE("human bound on identical annotations") {
  auto ex = small_example("h", {IndexSet{1, 2}, {1, 2}, {1, 2}});
  auto row = human_upper_bound(make_corpus({ex}), 3);
  CHECK(*row.f1 == 1.0);
  CHECK(*row.em_pct == 100.0);
  CHECK(row.rouge_l == doctest::Approx(1.0));
  CHECK(row.sentences == doctest::Approx(2.0));
}

TEST_CASE("human bound matches a hand computation") {
  std::mt19937_64 rng(77);
  auto c = random_corpus(rng, 15);
  const std::uint64_t seed = 5;
  auto row = human_upper_bound(c, seed, nullptr, 4);
  const auto picks = sample_annotations(c, seed);
  double f = 0, em = 0, rl = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& ex = c.examples[i];
    const auto& pred = ex.summary_annotations[picks[i]];
    double best = 0;
    bool match = false;
    double pair = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      if (k == picks[i]) continue;
      best = std::max(best, prf(pred, ex.summary_annotations[k]).f1);
      match = match || pred == ex.summary_annotations[k];
      pair += rouge_l_f1(ex.render(pred), ex.render(ex.summary_annotations[k])) / 2.0;
    }
    f += best;
    em += match;
    rl += pair;
  }
  const double n = static_cast<double>(c.size());
  CHECK(*row.f1 == doctest::Approx(f / n));
  CHECK(*row.em_pct == doctest::Approx(100.0 * em / n));
  CHECK(row.rouge_l == doctest::Approx(rl / n));
}

TEST_CASE("report csv") {
  std::vector<EvalRow> rows(2);
  rows[0].system = "lead2";
  rows[0].precision = 0.5;
  rows[0].recall = 0.25;
  rows[0].f1 = 1.0 / 3.0;
  rows[0].em_pct = 12.5;
  rows[0].rouge_l = 0.553;
  rows[0].tokens = 38.18;
  rows[0].sentences = 2;
  rows[1].system = "abstractive:q+a,l";
  rows[1].rouge_l = 0.4;
  rows[1].bert_score = 0.9;
  std::ostringstream out;
  write_report_csv(out, rows);
  const auto text = out.str();
  CHECK(text.substr(0, text.find('\n')) == "system,P,R,F1,EM_pct,ROUGE_L,BERTScore,tokens,sentences");
  std::istringstream in(text);
  auto back = read_report_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].system == "lead2");
  CHECK(*back[0].f1 == doctest::Approx(0.3333));
  CHECK(back[1].system == "abstractive:q+a,l");
  CHECK_FALSE(back[1].f1.has_value());
  CHECK(*back[1].bert_score == doctest::Approx(0.9));
  CHECK(render_report_text(rows).find("lead2") != std::string::npos);

  std::istringstream wrong("system,F1\nx,1\n");
  CHECK_THROWS_AS(read_report_csv(wrong), DataError);
}

}  // TEST_SUITE
