#include "lfqa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "lfqa/text.hpp"

namespace lfqa {

using nlohmann::json;

std::string to_string(Dataset d) {
  switch (d) {
    case Dataset::eli5: return "eli5";
    case Dataset::nq: return "nq";
    case Dataset::webgpt: return "webgpt";
  }
  return "unknown";
}

Dataset parse_dataset(const std::string& name) {
  for (auto d : kAllDatasets) {
    if (to_string(d) == name) return d;
  }
  throw DataError("unknown dataset '" + name + "'");
}

std::string QAExample::answer_text() const { return join(answer_sentences, " "); }

std::string QAExample::render(const IndexSet& selected) const {
  std::string out;
  for (auto i : selected) {
    if (i >= answer_sentences.size()) continue;
    if (!out.empty()) out += ' ';
    out += answer_sentences[i];
  }
  return out;
}

void validate(const QAExample& ex) {
  auto fail = [&](const std::string& field, const std::string& why) {
    throw DataError("example '" + ex.id + "': field '" + field + "' " + why);
  };
  if (ex.id.empty()) fail("id", "is empty");
  const auto n = ex.answer_sentences.size();
  if (n < kMinSentences || n > kMaxSentences) {
    fail("answer_sentences", fmt::format("has {} sentences, expected {}..{}", n, kMinSentences, kMaxSentences));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (trim(ex.answer_sentences[i]).empty()) fail("answer_sentences", fmt::format("entry {} is blank", i));
  }
  for (std::size_t a = 0; a < ex.summary_annotations.size(); ++a) {
    const auto& ann = ex.summary_annotations[a];
    if (ann.empty()) fail("summary_annotations", fmt::format("annotation {} is empty", a));
    if (*ann.rbegin() >= n) {
      fail("summary_annotations", fmt::format("annotation {} has index {} outside [0, {}]", a, *ann.rbegin(), n - 1));
    }
  }
}

QAExample example_from_json(const json& rec) {
  static const std::array<const char*, 6> kFields = {"id", "dataset", "question", "title",
                                                     "answer_sentences", "summary_annotations"};
  if (!rec.is_object()) throw DataError("record is not an object");
  for (const auto* f : kFields) {
    if (!rec.contains(f)) throw DataError(std::string("missing field '") + f + "'");
  }
  for (auto it = rec.begin(); it != rec.end(); ++it) {
    if (std::find_if(kFields.begin(), kFields.end(), [&](const char* f) { return it.key() == f; }) == kFields.end()) {
      throw DataError("unexpected field '" + it.key() + "'");
    }
  }
  QAExample ex;
  try {
    ex.id = rec.at("id").get<std::string>();
    ex.dataset = parse_dataset(rec.at("dataset").get<std::string>());
    ex.question = rec.at("question").get<std::string>();
    if (!rec.at("title").is_null()) ex.title = rec.at("title").get<std::string>();
    ex.answer_sentences = rec.at("answer_sentences").get<std::vector<std::string>>();
    const auto& anns = rec.at("summary_annotations");
    if (!anns.is_array() || anns.size() != kAnnotationsPerExample) {
      throw DataError("example '" + ex.id + "': field 'summary_annotations' must hold exactly 3 arrays");
    }
    for (std::size_t a = 0; a < kAnnotationsPerExample; ++a) {
      for (const auto& v : anns[a]) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
          throw DataError("example '" + ex.id + "': field 'summary_annotations' holds a non-index value");
        }
        ex.summary_annotations[a].insert(v.get<std::size_t>());
      }
    }
  } catch (const json::exception& e) {
    throw DataError("example '" + ex.id + "': " + e.what());
  }
  validate(ex);
  return ex;
}

json to_json(const QAExample& ex) {
  json anns = json::array();
  for (const auto& a : ex.summary_annotations) anns.push_back(json(std::vector<std::size_t>(a.begin(), a.end())));
  return json{{"id", ex.id},
              {"dataset", to_string(ex.dataset)},
              {"question", ex.question},
              {"title", ex.title ? json(*ex.title) : json(nullptr)},
              {"answer_sentences", ex.answer_sentences},
              {"summary_annotations", anns}};
}

Corpus read_corpus(std::istream& in, std::filesystem::path provenance) {
  Corpus corpus;
  corpus.provenance = std::move(provenance);
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusParseError(lineno, e.what());
    }
    QAExample ex;
    try {
      ex = example_from_json(rec);
    } catch (const DataError& e) {
      throw CorpusParseError(lineno, e.what());
    }
    if (!ids.insert(ex.id).second) throw CorpusParseError(lineno, "duplicate id '" + ex.id + "'");
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  return read_corpus(in, path);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& ex : corpus.examples) out << to_json(ex).dump() << '\n';
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  write_corpus(out, corpus);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % range);
}

CorpusSplit split_corpus(const Corpus& corpus, std::uint64_t seed, const std::array<double, 3>& ratios) {
  for (double r : ratios) {
    if (!(r >= 0.0) || r > 1.0) throw ConfigError("split ratios must lie in [0, 1]");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw ConfigError(fmt::format("split ratios sum to {}, expected 1", ratios[0] + ratios[1] + ratios[2]));
  }
  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  auto portion = [n](double r) { return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9)); };
  const std::size_t n_val = portion(ratios[1]);
  const std::size_t n_test = portion(ratios[2]);
  const std::size_t n_train = n - n_val - n_test;

  CorpusSplit split;
  for (auto* part : {&split.train, &split.validation, &split.test}) part->provenance = corpus.provenance;
  for (std::size_t k = 0; k < n; ++k) {
    Corpus& dst = k < n_train ? split.train : (k < n_train + n_val ? split.validation : split.test);
    dst.examples.push_back(corpus.examples[order[k]]);
  }
  return split;
}

std::vector<std::size_t> sample_annotations(const Corpus& corpus, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picks(corpus.size());
  for (auto& p : picks) p = uniform_index(rng, kAnnotationsPerExample);
  return picks;
}

double compression_ratio(const QAExample& ex, const IndexSet& summary) {
  const auto d = token_count(ex.answer_text());
  if (d == 0) return 0.0;
  return static_cast<double>(token_count(ex.render(summary))) / static_cast<double>(d);
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Quartiles quartiles(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return {quantile_sorted(values, 0.0), quantile_sorted(values, 0.25), quantile_sorted(values, 0.5),
          quantile_sorted(values, 0.75), quantile_sorted(values, 1.0)};
}

namespace {

struct ExampleMeasures {
  Dataset dataset;
  double q_tokens, d_tokens, d_sentences, s_tokens, s_sentences, ratio;
};

std::vector<ExampleMeasures> measure(const Corpus& corpus, std::uint64_t seed) {
  if (corpus.empty()) throw DataError("statistics requested for an empty corpus");
  const auto picks = sample_annotations(corpus, seed);
  std::vector<ExampleMeasures> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& ex = corpus.examples[i];
    const auto& summary = ex.summary_annotations[picks[i]];
    const double d = static_cast<double>(token_count(ex.answer_text()));
    const double s = static_cast<double>(token_count(ex.render(summary)));
    out.push_back({ex.dataset, static_cast<double>(token_count(ex.question)), d,
                   static_cast<double>(ex.size()), s, static_cast<double>(summary.size()), d > 0 ? s / d : 0.0});
  }
  return out;
}

DatasetStats summarize(std::string name, const std::vector<const ExampleMeasures*>& rows) {
  DatasetStats st;
  st.name = std::move(name);
  st.count = rows.size();
  if (rows.empty()) return st;
  for (const auto* r : rows) {
    st.question_tokens += r->q_tokens;
    st.answer_tokens += r->d_tokens;
    st.answer_sentences += r->d_sentences;
    st.summary_tokens += r->s_tokens;
    st.summary_sentences += r->s_sentences;
    st.compression += r->ratio;
  }
  const double n = static_cast<double>(rows.size());
  for (double* f : {&st.question_tokens, &st.answer_tokens, &st.answer_sentences, &st.summary_tokens,
                    &st.summary_sentences, &st.compression}) {
    *f /= n;
  }
  return st;
}

std::vector<std::pair<std::string, Quartiles>> distribution_of(const std::vector<ExampleMeasures>& rows) {
  std::vector<std::pair<std::string, Quartiles>> out;
  for (auto d : kAllDatasets) {
    std::vector<double> ratios;
    for (const auto& r : rows) {
      if (r.dataset == d) ratios.push_back(r.ratio);
    }
    if (!ratios.empty()) out.emplace_back(to_string(d), quartiles(std::move(ratios)));
  }
  return out;
}

}  // namespace

StatsReport corpus_stats(const Corpus& corpus, std::uint64_t seed) {
  const auto rows = measure(corpus, seed);
  StatsReport report;
  std::vector<const ExampleMeasures*> all;
  for (const auto& r : rows) all.push_back(&r);
  for (auto d : kAllDatasets) {
    std::vector<const ExampleMeasures*> subset;
    for (const auto& r : rows) {
      if (r.dataset == d) subset.push_back(&r);
    }
    if (!subset.empty()) report.per_dataset.push_back(summarize(to_string(d), subset));
  }
  report.overall = summarize("all", all);
  report.compression_quartiles = distribution_of(rows);
  return report;
}

std::vector<std::pair<std::string, Quartiles>> compression_distribution(const Corpus& corpus, std::uint64_t seed) {
  return distribution_of(measure(corpus, seed));
}

std::string render_stats(const StatsReport& report) {
  std::ostringstream out;
  out << fmt::format("{:<8} {:>6} {:>6} {:>14} {:>12} {:>7}\n", "dataset", "#", "|q|", "|d|", "|s|", "|s|/|d|");
  auto row = [&](const DatasetStats& s) {
    out << fmt::format("{:<8} {:>6} {:>6.1f} {:>14} {:>12} {:>7.2f}\n", s.name, s.count, s.question_tokens,
                       fmt::format("{:.1f} ({:.1f})", s.answer_tokens, s.answer_sentences),
                       fmt::format("{:.1f} ({:.1f})", s.summary_tokens, s.summary_sentences), s.compression);
  };
  for (const auto& s : report.per_dataset) row(s);
  row(report.overall);
  out << "\ncompression ratio quartiles\n";
  out << fmt::format("{:<8} {:>6} {:>6} {:>6} {:>6} {:>6}\n", "dataset", "min", "q1", "median", "q3", "max");
  for (const auto& [name, q] : report.compression_quartiles) {
    out << fmt::format("{:<8} {:>6.3f} {:>6.3f} {:>6.3f} {:>6.3f} {:>6.3f}\n", name, q.min, q.q1, q.median, q.q3, q.max);
  }
  return out.str();
}

json to_json(const StatsReport& report) {
  auto row = [](const DatasetStats& s) {
    return json{{"dataset", s.name},
                {"count", s.count},
                {"question_tokens", s.question_tokens},
                {"answer_tokens", s.answer_tokens},
                {"answer_sentences", s.answer_sentences},
                {"summary_tokens", s.summary_tokens},
                {"summary_sentences", s.summary_sentences},
                {"compression", s.compression}};
  };
  json j;
  j["per_dataset"] = json::array();
  for (const auto& s : report.per_dataset) j["per_dataset"].push_back(row(s));
  j["overall"] = row(report.overall);
  j["compression_quartiles"] = json::object();
  for (const auto& [name, q] : report.compression_quartiles) {
    j["compression_quartiles"][name] = {{"min", q.min}, {"q1", q.q1}, {"median", q.median}, {"q3", q.q3}, {"max", q.max}};
  }
  return j;
}

}  // namespace lfqa
