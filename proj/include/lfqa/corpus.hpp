#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfqa/errors.hpp"

namespace lfqa {

enum class Dataset { eli5, nq, webgpt };

inline constexpr std::array<Dataset, 3> kAllDatasets = {Dataset::eli5, Dataset::nq, Dataset::webgpt};

std::string to_string(Dataset d);
Dataset parse_dataset(const std::string& name);

/// Sorted, duplicate-free sentence indices.
using IndexSet = std::set<std::size_t>;

inline constexpr std::size_t kMinSentences = 3;
inline constexpr std::size_t kMaxSentences = 15;
inline constexpr std::size_t kAnnotationsPerExample = 3;

struct QAExample {
  std::string id;
  Dataset dataset = Dataset::eli5;
  std::string question;
  std::optional<std::string> title;
  std::vector<std::string> answer_sentences;
  std::array<IndexSet, kAnnotationsPerExample> summary_annotations;

  std::size_t size() const { return answer_sentences.size(); }
  /// Answer sentences joined by single spaces.
  std::string answer_text() const;
  /// Selected sentences in index order joined by single spaces.
  std::string render(const IndexSet& selected) const;

  friend bool operator==(const QAExample&, const QAExample&) = default;
};

/// Throws DataError naming the example id and offending field.
void validate(const QAExample& example);

struct Corpus {
  std::vector<QAExample> examples;
  std::filesystem::path provenance;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

/// Parse error at a given 1-based line of a corpus file.
class CorpusParseError : public DataError {
 public:
  CorpusParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

QAExample example_from_json(const nlohmann::json& record);
nlohmann::json to_json(const QAExample& example);

Corpus read_corpus(std::istream& in, std::filesystem::path provenance = {});
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct CorpusSplit {
  Corpus train;
  Corpus validation;
  Corpus test;
};

/// Seeded shuffle then partition. Validation and test receive
/// floor(ratio * N) examples each; train gets the rest.
CorpusSplit split_corpus(const Corpus& corpus, std::uint64_t seed,
                         const std::array<double, 3>& ratios = {0.7, 0.15, 0.15});

/// Uniform draw from [0, n) on top of mt19937_64. Unlike
/// std::uniform_int_distribution the sequence is identical on every
/// standard library.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

/// One annotation index in [0, 3) per example, drawn in corpus order.
std::vector<std::size_t> sample_annotations(const Corpus& corpus, std::uint64_t seed);

struct DatasetStats {
  std::string name;  // dataset name or "all"
  std::size_t count = 0;
  double question_tokens = 0;
  double answer_tokens = 0;
  double answer_sentences = 0;
  double summary_tokens = 0;
  double summary_sentences = 0;
  double compression = 0;  // mean of per-example |s|/|d|
};

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

struct StatsReport {
  std::vector<DatasetStats> per_dataset;  // datasets present, in enum order
  DatasetStats overall;
  std::vector<std::pair<std::string, Quartiles>> compression_quartiles;
};

/// Token-level |s|/|d| for one annotation of one example.
double compression_ratio(const QAExample& example, const IndexSet& summary);

/// Linear-interpolation quantile (numpy's default) of an ascending range.
double quantile_sorted(const std::vector<double>& sorted, double p);
Quartiles quartiles(std::vector<double> values);

StatsReport corpus_stats(const Corpus& corpus, std::uint64_t seed);

/// Per-dataset quartiles of the compression ratio, using the same sampled
/// annotation as corpus_stats for the same seed.
std::vector<std::pair<std::string, Quartiles>> compression_distribution(const Corpus& corpus,
                                                                         std::uint64_t seed);

std::string render_stats(const StatsReport& report);
nlohmann::json to_json(const StatsReport& report);

}  // namespace lfqa
