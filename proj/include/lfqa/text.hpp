#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lfqa {

/// Lowercase word tokens with no empty entries and no embedded whitespace.
using TokenList = std::vector<std::string>;

/// Lowercases, splits on whitespace, strips leading/trailing punctuation from
/// each token and drops tokens that were pure punctuation.
TokenList tokenize(std::string_view text);

/// Number of tokens `tokenize` would produce.
std::size_t token_count(std::string_view text);

/// |types(candidate) ∩ types(reference)| / |types(candidate)|, or 0 when the
/// candidate has no tokens.
double unigram_overlap(std::string_view candidate, std::string_view reference);

/// Byte range [begin, end) of one sentence inside the source text.
using SentenceSpan = std::pair<std::size_t, std::size_t>;

/// Sentence boundaries for raw text. A boundary is `.`, `?` or `!` (plus any
/// closing quotes/brackets) followed by whitespace and then an uppercase
/// letter, digit-free quote or opening bracket. A period ending a known
/// abbreviation is never a boundary. Spans are trimmed of surrounding
/// whitespace and together cover every non-whitespace byte of the input.
std::vector<SentenceSpan> sentence_spans(std::string_view text);

std::vector<std::string> split_sentences(std::string_view text);

std::string_view trim(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace lfqa
