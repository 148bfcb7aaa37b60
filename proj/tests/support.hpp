#pragma once

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lfqa/corpus.hpp"

namespace lfqa::testing {

inline QAExample make_example(std::string id, std::vector<std::string> sentences,
                              std::array<IndexSet, 3> annotations, std::string question = "What happens next?",
                              Dataset dataset = Dataset::eli5, std::optional<std::string> title = std::nullopt) {
  QAExample ex;
  ex.id = std::move(id);
  ex.dataset = dataset;
  ex.question = std::move(question);
  ex.title = std::move(title);
  ex.answer_sentences = std::move(sentences);
  ex.summary_annotations = std::move(annotations);
  return ex;
}

inline Corpus make_corpus(std::vector<QAExample> examples) {
  Corpus c;
  c.examples = std::move(examples);
  return c;
}

/// Three-sentence example used where content does not matter.
inline QAExample small_example(std::string id, std::array<IndexSet, 3> annotations = {IndexSet{0}, {0}, {0}}) {
  return make_example(std::move(id), {"First sentence here.", "Second one follows.", "Third closes it."},
                      std::move(annotations));
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("lfqa-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

/// Random non-empty subset of [0, n).
inline IndexSet random_subset(std::mt19937_64& rng, std::size_t n) {
  IndexSet s;
  while (s.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      if (rng() % 2) s.insert(i);
    }
  }
  return s;
}

/// Random well-formed example with n in [3, 15].
inline QAExample random_example(std::mt19937_64& rng, const std::string& id) {
  static const std::vector<std::string> words = {"light", "water", "the", "cells", "energy", "a",
                                                 "moves", "heat", "because", "sun", "of", "air"};
  const std::size_t n = 3 + rng() % 13;
  std::vector<std::string> sentences;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s = "Word" + std::to_string(i);
    const std::size_t len = 1 + rng() % 12;
    for (std::size_t k = 0; k < len; ++k) s += " " + words[rng() % words.size()];
    sentences.push_back(s + ".");
  }
  const Dataset d = kAllDatasets[rng() % 3];
  std::optional<std::string> title;
  if (d == Dataset::nq) title = "Title " + id;
  return make_example(id, sentences, {random_subset(rng, n), random_subset(rng, n), random_subset(rng, n)},
                      "why does the " + words[rng() % words.size()] + " move", d, title);
}

inline Corpus random_corpus(std::mt19937_64& rng, std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) c.examples.push_back(random_example(rng, "ex" + std::to_string(i)));
  return c;
}

}  // namespace lfqa::testing
