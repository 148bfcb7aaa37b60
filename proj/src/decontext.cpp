#include "lfqa/decontext.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "lfqa/text.hpp"

namespace lfqa {

std::string to_string(DecontextCategory c) {
  switch (c) {
    case DecontextCategory::Done: return "Done";
    case DecontextCategory::Unnecessary: return "Unnecessary";
    case DecontextCategory::Infeasible: return "Infeasible";
  }
  return "Unnecessary";
}

void validate(const DecontextRequest& r) {
  if (trim(r.title).empty()) throw DataError("decontextualization request has an empty title");
  if (r.target_index >= r.sentences.size()) {
    throw DataError("decontextualization target " + std::to_string(r.target_index) + " outside paragraph of " +
                    std::to_string(r.sentences.size()));
  }
}

std::optional<std::size_t> should_decontextualize(const IndexSet& selected) {
  if (selected.empty()) throw DataError("cannot gate an empty selection");
  if (selected.count(0)) return std::nullopt;
  return *selected.begin();
}

std::string title_for(const QAExample& example) {
  if (example.title && !trim(*example.title).empty()) return *example.title;
  return example.question;
}

std::string serialize_request(const DecontextRequest& r) {
  validate(r);
  std::vector<std::string> pre(r.sentences.begin(), r.sentences.begin() + static_cast<std::ptrdiff_t>(r.target_index));
  std::vector<std::string> post(r.sentences.begin() + static_cast<std::ptrdiff_t>(r.target_index) + 1, r.sentences.end());
  std::string out = "[CLS] " + r.title;
  for (const auto& segment : {join(pre, " "), r.sentences[r.target_index], join(post, " ")}) {
    if (segment.empty()) continue;
    out += " [s] " + segment;
  }
  out += " [s]";
  return out;
}

DecontextResult parse_response(std::string_view response, std::string_view original) {
  const auto sep = response.find("[SEP]");
  if (sep == std::string_view::npos) throw MalformedOutput("decontextualizer output lacks [SEP]", std::string(response));
  std::string category(trim(response.substr(0, sep)));
  if (category.size() >= 2 && category.front() == '[' && category.back() == ']') {
    category = category.substr(1, category.size() - 2);
  }
  for (auto& c : category) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  DecontextResult r;
  r.original = std::string(original);
  r.payload = std::string(trim(response.substr(sep + 5)));
  if (category == "done") {
    if (r.payload.empty()) throw MalformedOutput("Done output carries no rewritten sentence", std::string(response));
    r.category = DecontextCategory::Done;
    r.text = r.payload;
    r.edited = true;
  } else if (category == "unnecessary" || category == "infeasible") {
    r.category = category == "unnecessary" ? DecontextCategory::Unnecessary : DecontextCategory::Infeasible;
    r.text = r.original;
  } else {
    throw MalformedOutput("unknown decontextualization category '" + category + "'", std::string(response));
  }
  return r;
}

namespace {

struct Word {
  std::size_t begin = 0, end = 0;  // raw byte range in the sentence
  std::string raw;
  std::string bare;  // lowercase, edge punctuation removed
};

std::vector<Word> words_of(std::string_view s) {
  std::vector<Word> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    Word w;
    w.begin = i;
    w.end = j;
    w.raw = std::string(s.substr(i, j - i));
    auto toks = tokenize(w.raw);
    w.bare = toks.empty() ? std::string{} : toks.front();
    out.push_back(std::move(w));
    i = j;
  }
  return out;
}

bool ends_with_punct(const std::string& raw) {
  return !raw.empty() && std::ispunct(static_cast<unsigned char>(raw.back())) && raw.back() != '\'';
}

bool has_alpha(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
}

bool is_capitalized(const std::string& raw) {
  for (char c : raw) {
    if (std::isalpha(static_cast<unsigned char>(c))) return std::isupper(static_cast<unsigned char>(c)) != 0;
  }
  return false;
}

const std::unordered_set<std::string>& determiners() {
  static const std::unordered_set<std::string> k = {"the", "a", "an", "his", "her", "its", "their", "our", "your", "my"};
  return k;
}

// Words that never sit inside a noun phrase (function words, auxiliaries and
// frequent sentence openers).
const std::unordered_set<std::string>& non_nominal() {
  static const std::unordered_set<std::string> k = {
      "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does", "did",
      "will", "would", "can", "could", "should", "shall", "may", "might", "must", "of", "in", "on", "at",
      "from", "to", "with", "by", "for", "about", "into", "onto", "over", "under", "after", "before",
      "between", "through", "during", "without", "within", "and", "or", "but", "nor", "so", "yet",
      "because", "when", "while", "if", "than", "then", "as", "that", "which", "who", "whom", "whose",
      "where", "why", "how", "what", "not", "no", "also", "just", "only", "very", "this", "these", "those",
      "there", "here", "it", "they", "he", "she", "we", "you", "i", "me", "him", "them", "us", "however",
      "although", "though", "since", "until", "unless", "even", "still", "more", "most", "less", "much",
      "many", "some", "any", "all", "each", "every", "both", "either", "neither", "such", "other",
      "another", "now", "often", "usually", "basically", "actually", "really", "well", "yes", "thus",
      "therefore", "hence", "instead", "like", "get", "gets", "got", "make", "makes", "made", "send",
      "sends", "means", "mean", "said", "says", "say", "let", "lets", "near", "across", "behind", "above",
      "below", "against", "along", "among", "beside", "toward", "towards", "upon", "off", "out", "up",
      "down", "around", "inside", "outside", "beyond", "via", "per"};
  return k;
}

const std::unordered_set<std::string>& connectives() {
  static const std::unordered_set<std::string> k = {"when", "if", "because", "since", "so", "but", "and",
                                                     "as", "while", "although", "though", "also", "thus"};
  return k;
}

bool verb_like(const std::string& bare) {
  auto ends = [&](std::string_view suf) {
    return bare.size() > suf.size() + 2 && bare.compare(bare.size() - suf.size(), suf.size(), suf) == 0;
  };
  return ends("ed") || ends("ly") || ends("ing");
}

bool nominal(const Word& w) {
  return has_alpha(w.bare) && !non_nominal().count(w.bare) && !determiners().count(w.bare);
}

bool plural_head(const std::string& bare) {
  if (bare.size() < 3 || bare.back() != 's') return false;
  const auto tail = bare.substr(bare.size() - 2);
  return tail != "ss" && tail != "us" && tail != "is";
}

enum class Number { singular, plural };

struct NounPhrase {
  std::size_t begin = 0, end = 0;  // byte range in its sentence, trailing punctuation excluded
  std::string text;
  Number number = Number::singular;
  bool proper = false;
};

std::size_t trimmed_end(const Word& w) {
  std::size_t end = w.end;
  while (end > w.begin && ends_with_punct(w.raw.substr(0, end - w.begin))) --end;
  return end;
}

// Continues a determiner phrase ending in a comma as a list "x, y, and z".
// Returns the index of the final conjunct or 0 when the pattern fails.
std::size_t comma_list_end(const std::vector<Word>& ws, std::size_t head) {
  std::size_t k = head + 1;
  while (k < ws.size() && ws[k].raw.back() == ',' && nominal(ws[k])) ++k;
  if (k + 1 < ws.size() && nominal(ws[k]) && !ends_with_punct(ws[k].raw) && ws[k + 1].bare == "and") ++k;
  if (k >= ws.size() || (ws[k].bare != "and" && ws[k].bare != "or")) return 0;
  ++k;
  if (k < ws.size() && determiners().count(ws[k].bare)) ++k;
  if (k >= ws.size() || !nominal(ws[k])) return 0;
  return k;
}

std::vector<NounPhrase> noun_phrases(std::string_view sentence) {
  const auto ws = words_of(sentence);
  std::vector<NounPhrase> out;
  std::size_t i = 0;
  while (i < ws.size()) {
    const bool det = determiners().count(ws[i].bare) > 0;
    const bool proper = !det && is_capitalized(ws[i].raw) && nominal(ws[i]);
    if (!det && !proper) {
      ++i;
      continue;
    }
    std::size_t head = i;
    bool plural = false;
    if (det) {
      std::size_t j = i + 1;
      while (j < ws.size() && j - i <= 3 && nominal(ws[j]) && !verb_like(ws[j].bare)) {
        head = j;
        if (ends_with_punct(ws[j].raw)) break;
        ++j;
      }
      if (head == i || ends_with_punct(ws[i].raw)) {
        ++i;
        continue;
      }
      plural = plural_head(ws[head].bare) && ws[i].bare != "a" && ws[i].bare != "an";
      if (ws[head].raw.back() == ',') {
        if (auto last = comma_list_end(ws, head)) {
          head = last;
          plural = true;
        }
      }
    } else {
      while (head + 1 < ws.size() && !ends_with_punct(ws[head].raw) && is_capitalized(ws[head + 1].raw) &&
             nominal(ws[head + 1])) {
        ++head;
      }
    }
    // "X and the Y" / "X and Y" coordination.
    if (!ends_with_punct(ws[head].raw) && head + 2 < ws.size() && (ws[head + 1].bare == "and")) {
      std::size_t k = head + 2;
      const bool next_det = determiners().count(ws[k].bare) > 0;
      if (next_det) ++k;
      if (k < ws.size() && nominal(ws[k]) && (next_det || is_capitalized(ws[k].raw))) {
        const std::size_t first = k;
        while (k + 1 < ws.size() && !ends_with_punct(ws[k].raw) && nominal(ws[k + 1]) &&
               !verb_like(ws[k + 1].bare) && (next_det ? k + 1 - first < 3 : is_capitalized(ws[k + 1].raw))) {
          ++k;
        }
        head = k;
        plural = true;
      }
    }
    NounPhrase np;
    np.begin = ws[i].begin;
    np.end = trimmed_end(ws[head]);
    np.text = std::string(sentence.substr(np.begin, np.end - np.begin));
    np.number = plural ? Number::plural : Number::singular;
    np.proper = proper;
    out.push_back(std::move(np));
    i = head + 1;
  }
  return out;
}

enum class AnaphorKind { thing, person, place };

struct Anaphor {
  std::size_t word = 0;       // index of the first replaced word
  std::size_t span_words = 1;  // 1 for a pronoun, 2 for "these X"
  Number number = Number::singular;
  AnaphorKind kind = AnaphorKind::thing;
};

// Finds an anaphor at the start of the sentence, optionally after one
// connective ("When these parts ..."). `contraction` reports "it's"-style
// forms that cannot be substituted in place.
std::optional<Anaphor> find_anaphor(const std::vector<Word>& ws, bool& contraction) {
  contraction = false;
  static const std::unordered_set<std::string> kExistential = {
      "is", "are", "was", "were", "seem", "seems", "exist", "exists", "will", "would", "might", "may",
      "can", "could", "has", "have", "had", "must", "should", "used", "appear", "appears"};
  static const std::unordered_set<std::string> kContractions = {"it's", "that's", "they're", "he's", "she's",
                                                                "it'll", "they'll", "they've", "that'll"};
  for (std::size_t p = 0; p < 2 && p < ws.size(); ++p) {
    if (p == 1 && !connectives().count(ws[0].bare)) break;
    const auto& w = ws[p].bare;
    if (kContractions.count(w)) {
      contraction = true;
      return std::nullopt;
    }
    Anaphor a;
    a.word = p;
    if (w == "this" || w == "that" || w == "these" || w == "those") {
      a.number = (w == "these" || w == "those") ? Number::plural : Number::singular;
      if (p + 1 < ws.size() && !ends_with_punct(ws[p].raw) && nominal(ws[p + 1]) && !verb_like(ws[p + 1].bare) &&
          !is_capitalized(ws[p + 1].raw)) {
        a.span_words = 2;
      }
      return a;
    }
    if (w == "it") return a;
    if (w == "they") {
      a.number = Number::plural;
      return a;
    }
    if (w == "he" || w == "she") {
      a.kind = AnaphorKind::person;
      return a;
    }
    if (w == "there") {
      if (p + 1 < ws.size() && kExistential.count(ws[p + 1].bare)) return std::nullopt;
      a.kind = AnaphorKind::place;
      return a;
    }
  }
  // Sentence-final locative: "... kept their assets there."
  if (ws.size() >= 2 && ws.back().bare == "there") {
    const char end = ws.back().raw.back();
    if (end == '.' || end == '!' || end == '?') {
      Anaphor a;
      a.word = ws.size() - 1;
      a.kind = AnaphorKind::place;
      return a;
    }
  }
  return std::nullopt;
}

bool compatible(const NounPhrase& np, const Anaphor& a) {
  switch (a.kind) {
    case AnaphorKind::person: return np.proper && np.number == Number::singular;
    case AnaphorKind::place: return np.proper;
    case AnaphorKind::thing: return np.number == a.number;
  }
  return false;
}

std::string with_initial_case(std::string s, bool upper) {
  for (auto& c : s) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      c = static_cast<char>(upper ? std::toupper(static_cast<unsigned char>(c)) : std::tolower(static_cast<unsigned char>(c)));
      break;
    }
  }
  return s;
}

DecontextResult unchanged(DecontextCategory category, const std::string& original) {
  DecontextResult r;
  r.category = category;
  r.text = original;
  r.original = original;
  r.payload = original;
  return r;
}

}  // namespace

DecontextResult rule_based_decontext(const DecontextRequest& request) {
  validate(request);
  const auto& target = request.sentences[request.target_index];
  const auto ws = words_of(target);
  bool contraction = false;
  const auto anaphor = find_anaphor(ws, contraction);
  if (contraction) return unchanged(DecontextCategory::Infeasible, target);
  if (!anaphor) return unchanged(DecontextCategory::Unnecessary, target);

  // Nearest preceding sentence with at least one compatible phrase decides.
  std::vector<NounPhrase> found;
  for (std::size_t s = request.target_index; s-- > 0 && found.empty();) {
    for (auto& np : noun_phrases(request.sentences[s])) {
      if (compatible(np, *anaphor)) found.push_back(std::move(np));
    }
  }
  // Nothing in the paragraph: the title names the topic, so its first
  // compatible phrase is taken.
  if (found.empty()) {
    for (auto& np : noun_phrases(request.title)) {
      if (compatible(np, *anaphor)) {
        found.push_back(std::move(np));
        break;
      }
    }
  }
  // Several candidates: a sentence-initial subject still wins.
  if (found.size() > 1 && found.front().begin == 0) found.resize(1);
  if (found.size() != 1) return unchanged(DecontextCategory::Infeasible, target);

  const NounPhrase& np = found.front();
  const auto& first = ws[anaphor->word];
  const auto& last = ws[anaphor->word + anaphor->span_words - 1];
  const std::size_t span_begin = first.begin;
  // Trailing punctuation of the span stays in place ("This, ...").
  const std::size_t span_end = trimmed_end(last);
  const bool sentence_initial = anaphor->word == 0;
  std::string replacement = np.proper ? np.text : with_initial_case(np.text, sentence_initial);
  if (np.proper && sentence_initial) replacement = with_initial_case(replacement, true);
  static const std::unordered_set<std::string> kLocative = {"in", "at", "from", "to", "into", "over", "near",
                                                            "out", "up", "down", "back", "through", "around"};
  const bool after_preposition = anaphor->word > 0 && kLocative.count(ws[anaphor->word - 1].bare);
  if (anaphor->kind == AnaphorKind::place && !after_preposition) {
    replacement = (sentence_initial ? "In " : "in ") + np.text;
  }

  DecontextResult r;
  r.category = DecontextCategory::Done;
  r.edited = true;
  r.original = target;
  r.text = target.substr(0, span_begin) + replacement + target.substr(span_end);
  r.payload = r.text;
  r.replaced_span = std::make_pair(span_begin, span_end);
  return r;
}

DecontextResult EndpointBackend::rewrite(const DecontextRequest& request, std::string_view request_id) {
  const auto output =
      call_for_text(*endpoint_, nlohmann::json{{"input", serialize_request(request)}}, "output", request_id);
  return parse_response(output, request.sentences[request.target_index]);
}

DecontextOutcome decontextualize(const QAExample& example, const SummaryCandidate& base, DecontextBackend& backend) {
  DecontextOutcome out;
  out.candidate = base;
  out.candidate.system = base.system + "+decontext:" + backend.name();
  if (!out.candidate.summary_text) out.candidate.summary_text = example.render(base.selected);

  const auto target = should_decontextualize(base.selected);
  if (!target) return out;

  DecontextRequest request{title_for(example), example.answer_sentences, *target};
  const auto& original = example.answer_sentences[*target];
  DecontextResult result;
  try {
    result = backend.rewrite(request, example.id);
  } catch (const std::exception& e) {
    spdlog::warn("decontextualizer '{}' failed on '{}': {}; falling back to rules", backend.name(), example.id, e.what());
    try {
      result = rule_based_decontext(request);
    } catch (const std::exception& e2) {
      spdlog::warn("rule-based fallback failed on '{}': {}", example.id, e2.what());
      result = unchanged(DecontextCategory::Unnecessary, original);
    }
  }
  if (result.category != DecontextCategory::Done) result.text = original;
  out.candidate.decontext_category = to_string(result.category);

  if (result.category == DecontextCategory::Done) {
    std::vector<std::string> parts{result.text};
    for (auto i : base.selected) {
      if (i != *target) parts.push_back(example.answer_sentences[i]);
    }
    out.candidate.summary_text = join(parts, " ");
  }
  out.result = std::move(result);
  return out;
}

EditStats edit_stats(std::span<const DecontextResult> results) {
  EditStats st;
  st.total = results.size();
  if (results.empty()) return st;
  double increase = 0;
  std::size_t done = 0, un = 0, inf = 0;
  for (const auto& r : results) {
    switch (r.category) {
      case DecontextCategory::Done: {
        ++done;
        const double before = static_cast<double>(token_count(r.original));
        const double after = static_cast<double>(token_count(r.text));
        if (before > 0) increase += (after - before) / before;
        break;
      }
      case DecontextCategory::Unnecessary: ++un; break;
      case DecontextCategory::Infeasible: ++inf; break;
    }
  }
  const double n = static_cast<double>(results.size());
  st.unnecessary_pct = 100.0 * static_cast<double>(un) / n;
  st.infeasible_pct = 100.0 * static_cast<double>(inf) / n;
  st.done_pct = 100.0 * static_cast<double>(done) / n;
  if (done > 0) st.length_increase = increase / static_cast<double>(done);
  return st;
}

}  // namespace lfqa
