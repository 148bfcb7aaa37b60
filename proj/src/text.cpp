#include "lfqa/text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace lfqa {
namespace {

struct CodePoint {
  char32_t value;
  std::size_t length;  // bytes
};

// Lenient UTF-8 decoding: invalid lead bytes decode as themselves (length 1).
CodePoint decode_at(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    if (int c1 = cont(1); c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0)
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
  }
  return {b0, 1};
}

// Start of the code point that ends right before byte `end`.
std::size_t prev_start(std::string_view s, std::size_t end) {
  std::size_t i = end - 1;
  while (i > 0 && end - i < 4 && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) --i;
  return i;
}

bool is_space(char32_t cp) {
  if (cp < 0x80) return std::isspace(static_cast<int>(cp)) != 0;
  return cp == 0x00A0 || (cp >= 0x2000 && cp <= 0x200B) || cp == 0x202F || cp == 0x205F ||
         cp == 0x3000;
}

bool is_punct(char32_t cp) {
  if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
  switch (cp) {
    case 0x00A1: case 0x00A7: case 0x00AB: case 0x00B6: case 0x00B7: case 0x00BB: case 0x00BF:
      return true;
    default:
      break;
  }
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         (cp >= 0x3001 && cp <= 0x303F) || (cp >= 0xFF01 && cp <= 0xFF0F) ||
         (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) ||
         (cp >= 0xFF5B && cp <= 0xFF65);
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

// Appends the token in raw[begin, end) after stripping edge punctuation.
void emit_token(std::string_view raw, TokenList& out) {
  std::size_t b = 0, e = raw.size();
  while (b < e) {
    auto cp = decode_at(raw, b);
    if (!is_punct(cp.value)) break;
    b += cp.length;
  }
  while (e > b) {
    std::size_t s = prev_start(raw, e);
    if (!is_punct(decode_at(raw, s).value)) break;
    e = s;
  }
  if (b < e) out.push_back(lower_ascii(raw.substr(b, e - b)));
}

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> kAbbrev = {
      "dr", "mr", "mrs", "ms", "prof", "st", "jr", "sr", "vs", "e.g", "i.e",
      "u.s", "u.k", "inc", "ltd", "co", "mt", "fig", "approx", "cf", "al"};
  return kAbbrev;
}

bool is_closing(std::string_view s, std::size_t i, std::size_t& len) {
  auto cp = decode_at(s, i);
  len = cp.length;
  switch (cp.value) {
    case '"': case '\'': case ')': case ']': case 0x201D: case 0x2019:
      return true;
    default:
      return false;
  }
}

bool opens_sentence(std::string_view s, std::size_t i) {
  auto cp = decode_at(s, i);
  if (cp.value < 0x80) {
    const auto c = static_cast<unsigned char>(cp.value);
    return std::isupper(c) || c == '"' || c == '\'' || c == '(' || c == '[';
  }
  return cp.value == 0x201C || cp.value == 0x2018;
}

std::size_t skip_space(std::string_view s, std::size_t i) {
  while (i < s.size()) {
    auto cp = decode_at(s, i);
    if (!is_space(cp.value)) break;
    i += cp.length;
  }
  return i;
}

// True when the period at `dot` terminates a listed abbreviation.
bool ends_abbreviation(std::string_view s, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0) {
    std::size_t p = prev_start(s, b);
    if (is_space(decode_at(s, p).value)) break;
    b = p;
  }
  std::string word = lower_ascii(s.substr(b, dot - b));
  while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) {
    word.erase(word.begin());
  }
  return abbreviations().count(word) > 0;
}

}  // namespace

TokenList tokenize(std::string_view text) {
  TokenList out;
  std::size_t i = 0, start = std::string_view::npos;
  while (i < text.size()) {
    auto cp = decode_at(text, i);
    if (is_space(cp.value)) {
      if (start != std::string_view::npos) {
        emit_token(text.substr(start, i - start), out);
        start = std::string_view::npos;
      }
    } else if (start == std::string_view::npos) {
      start = i;
    }
    i += cp.length;
  }
  if (start != std::string_view::npos) emit_token(text.substr(start), out);
  return out;
}

std::size_t token_count(std::string_view text) { return tokenize(text).size(); }

double unigram_overlap(std::string_view candidate, std::string_view reference) {
  const auto cand = tokenize(candidate);
  if (cand.empty()) return 0.0;
  const std::unordered_set<std::string> cand_types(cand.begin(), cand.end());
  const auto ref = tokenize(reference);
  const std::unordered_set<std::string> ref_types(ref.begin(), ref.end());
  std::size_t shared = 0;
  for (const auto& t : cand_types) shared += ref_types.count(t);
  return static_cast<double>(shared) / static_cast<double>(cand_types.size());
}

std::vector<SentenceSpan> sentence_spans(std::string_view text) {
  std::vector<SentenceSpan> spans;
  std::size_t start = skip_space(text, 0);
  std::size_t i = start;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '.' || c == '?' || c == '!') {
      std::size_t j = i + 1, len = 0;
      while (j < text.size() && is_closing(text, j, len)) j += len;
      const std::size_t k = skip_space(text, j);
      const bool boundary = k > j && k < text.size() && opens_sentence(text, k) &&
                            !(c == '.' && ends_abbreviation(text, i));
      if (boundary) {
        spans.emplace_back(start, j);
        start = k;
        i = k;
        continue;
      }
    }
    ++i;
  }
  if (start < text.size()) {
    std::size_t end = text.size();
    while (end > start) {
      std::size_t p = prev_start(text, end);
      if (!is_space(decode_at(text, p).value)) break;
      end = p;
    }
    if (end > start) spans.emplace_back(start, end);
  }
  return spans;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  for (auto [b, e] : sentence_spans(text)) out.emplace_back(text.substr(b, e - b));
  return out;
}

std::string_view trim(std::string_view s) {
  std::size_t b = skip_space(s, 0);
  std::size_t e = s.size();
  while (e > b) {
    std::size_t p = prev_start(s, e);
    if (!is_space(decode_at(s, p).value)) break;
    e = p;
  }
  return s.substr(b, e - b);
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace lfqa
