#include "lfqa/candidate.hpp"

#include <fstream>

#include "lfqa/text.hpp"

namespace lfqa {

using nlohmann::json;

std::string SummaryCandidate::text_for(const QAExample& example) const {
  return summary_text ? *summary_text : example.render(selected);
}

SummaryCandidate make_extractive(const QAExample& example, std::string system, IndexSet selected) {
  SummaryCandidate c;
  c.example_id = example.id;
  c.system = std::move(system);
  c.summary_text = example.render(selected);
  c.selected = std::move(selected);
  return c;
}

void validate_candidate(const SummaryCandidate& c, const QAExample& example) {
  if (c.example_id != example.id) {
    throw DataError("candidate for '" + c.example_id + "' checked against example '" + example.id + "'");
  }
  if (!c.selected.empty() && *c.selected.rbegin() >= example.size()) {
    throw DataError("candidate for '" + c.example_id + "' selects sentence " + std::to_string(*c.selected.rbegin()) +
                    " of " + std::to_string(example.size()));
  }
  const bool rewritten = c.decontext_category && *c.decontext_category == "Done";
  if (c.summary_text && !c.selected.empty() && !rewritten && *c.summary_text != example.render(c.selected)) {
    throw DataError("candidate for '" + c.example_id + "' has summary_text that differs from its selected sentences");
  }
}

json to_json(const SummaryCandidate& c) {
  json j{{"example_id", c.example_id},
         {"system", c.system},
         {"selected", std::vector<std::size_t>(c.selected.begin(), c.selected.end())},
         {"summary_text", c.summary_text ? json(*c.summary_text) : json(nullptr)}};
  if (c.decontext_category) j["decontext"] = *c.decontext_category;
  return j;
}

SummaryCandidate candidate_from_json(const json& rec) {
  SummaryCandidate c;
  try {
    c.example_id = rec.at("example_id").get<std::string>();
    c.system = rec.value("system", std::string{});
    if (rec.contains("selected")) {
      for (const auto& v : rec.at("selected")) c.selected.insert(v.get<std::size_t>());
    }
    if (rec.contains("summary_text") && !rec.at("summary_text").is_null()) {
      c.summary_text = rec.at("summary_text").get<std::string>();
    }
    if (rec.contains("decontext") && !rec.at("decontext").is_null()) {
      c.decontext_category = rec.at("decontext").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw DataError("candidate record: " + std::string(e.what()));
  }
  return c;
}

std::vector<SummaryCandidate> read_candidates(std::istream& in) {
  std::vector<SummaryCandidate> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(candidate_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError("candidates line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<SummaryCandidate> load_candidates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open candidates file " + path.string());
  return read_candidates(in);
}

void write_candidates(std::ostream& out, const std::vector<SummaryCandidate>& candidates) {
  for (const auto& c : candidates) out << to_json(c).dump() << '\n';
}

}  // namespace lfqa
