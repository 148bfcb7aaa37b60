#include "lfqa/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "lfqa/text.hpp"

namespace lfqa {

using nlohmann::json;

std::string to_string(YesNo v) { return v == YesNo::Yes ? "Yes" : "No"; }

std::string to_string(Ternary v) {
  switch (v) {
    case Ternary::Yes: return "Yes";
    case Ternary::Partially: return "Partially";
    case Ternary::No: return "No";
  }
  return "No";
}

YesNo parse_yes_no(const std::string& label) {
  if (label == "Yes") return YesNo::Yes;
  if (label == "No") return YesNo::No;
  throw DataError("expected Yes or No, got '" + label + "'");
}

Ternary parse_ternary(const std::string& label) {
  if (label == "Yes") return Ternary::Yes;
  if (label == "Partially") return Ternary::Partially;
  if (label == "No") return Ternary::No;
  throw DataError("expected Yes, Partially or No, got '" + label + "'");
}

double adequacy_score(const std::string& label) {
  switch (parse_ternary(label)) {
    case Ternary::Yes: return 1.0;
    case Ternary::Partially: return 0.5;
    case Ternary::No: return 0.0;
  }
  return 0.0;
}

namespace {

bool blank(const std::string& s) { return trim(s).empty(); }

std::string str_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw DataError(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

std::int64_t time_field(const json& j) {
  auto it = j.find("time");
  if (it == j.end() || !it->is_number_integer()) throw DataError("missing integer field 'time'");
  return it->get<std::int64_t>();
}

std::int64_t system_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

void validate(const StudyItem& item) {
  if (blank(item.example_id)) throw DataError("study item with blank example_id");
  const auto where = " in study item '" + item.example_id + "'";
  if (blank(item.question)) throw DataError("blank question" + where);
  if (blank(item.long_answer)) throw DataError("blank long_answer" + where);
  if (item.variants.empty()) throw DataError("no variants" + where);
  for (const auto& [tag, text] : item.variants) {
    if (blank(tag)) throw DataError("blank variant tag" + where);
    if (blank(text)) throw DataError("empty text for variant '" + tag + "'" + where);
  }
  for (const auto& s : item.answer_sentences) {
    if (blank(s)) throw DataError("blank answer sentence" + where);
  }
}

json to_json(const StudyItem& item) {
  json j{{"example_id", item.example_id},
         {"question", item.question},
         {"long_answer", item.long_answer},
         {"variants", item.variants}};
  if (!item.answer_sentences.empty()) j["answer_sentences"] = item.answer_sentences;
  return j;
}

StudyItem study_item_from_json(const json& record) {
  if (!record.is_object()) throw DataError("study item must be an object");
  StudyItem item;
  try {
    item.example_id = str_field(record, "example_id");
    item.question = str_field(record, "question");
    item.long_answer = str_field(record, "long_answer");
    const auto& v = record.at("variants");
    if (!v.is_object()) throw DataError("'variants' must be an object");
    for (const auto& [tag, text] : v.items()) {
      if (!text.is_string()) throw DataError("variant '" + tag + "' is not a string");
      item.variants.emplace(tag, text.get<std::string>());
    }
    if (auto it = record.find("answer_sentences"); it != record.end() && !it->is_null()) {
      item.answer_sentences = it->get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("bad study item: ") + e.what());
  }
  validate(item);
  return item;
}

std::vector<StudyItem> read_study_items(std::istream& in) {
  std::vector<StudyItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    try {
      items.push_back(study_item_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("line {}: {}", lineno, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  return items;
}

json to_json(const Assignment& a) {
  json j{{"assignment_id", a.assignment_id},
         {"question", a.question},
         {"summary_text", a.summary_text},
         {"stage", a.stage}};
  if (a.long_answer) j["long_answer"] = *a.long_answer;
  return j;
}

std::size_t StudySnapshot::cell_count() const {
  std::size_t n = 0;
  for (const auto& item : items) n += item.variants.size();
  return n;
}

// ---------------------------------------------------------------------------
// StudyState

StudyState::StudyState(std::vector<StudyItem> items, StudyConfig config)
    : items_(std::move(items)), config_(std::move(config)) {
  if (items_.empty()) throw DataError("a study needs at least one item");
  if (config_.annotators_per_cell == 0) throw ConfigError("annotators_per_cell must be >= 1");
  if (config_.lease_seconds < 0) throw ConfigError("lease_seconds must be >= 0");
  for (std::size_t i = 0; i < items_.size(); ++i) {
    validate(items_[i]);
    if (!item_index_.emplace(items_[i].example_id, i).second) {
      throw DataError("duplicate example_id '" + items_[i].example_id + "' in study items");
    }
    for (const auto& [tag, text] : items_[i].variants) {
      cell_index_[{items_[i].example_id, tag}] = cells_.size();
      cells_.push_back(Cell{i, tag, 0});
    }
  }
}

json StudyState::header() const {
  json items = json::array();
  for (const auto& item : items_) items.push_back(to_json(item));
  return json{{"type", "study"},
              {"version", 1},
              {"annotators_per_cell", config_.annotators_per_cell},
              {"lease_seconds", config_.lease_seconds},
              {"instructions", config_.instructions},
              {"items", std::move(items)}};
}

const StudyItem& StudyState::item(const std::string& example_id) const {
  auto it = item_index_.find(example_id);
  if (it == item_index_.end()) throw UnknownAssignment("unknown example_id '" + example_id + "'");
  return items_[it->second];
}

std::vector<std::string> StudyState::sentences(const std::string& example_id) const {
  const auto& it = item(example_id);
  return it.answer_sentences.empty() ? split_sentences(it.long_answer) : it.answer_sentences;
}

const AnnotationRecord& StudyState::record(const std::string& assignment_id) const {
  auto it = record_index_.find(assignment_id);
  if (it == record_index_.end()) throw UnknownAssignment("unknown assignment '" + assignment_id + "'");
  return records_[it->second];
}

Assignment StudyState::view(const std::string& assignment_id) const {
  const auto& r = record(assignment_id);
  const auto& it = item(r.example_id);
  Assignment a;
  a.assignment_id = r.assignment_id;
  a.example_id = r.example_id;
  a.variant = r.variant;
  a.question = it.question;
  a.summary_text = it.variants.at(r.variant);
  a.stage = r.stage1 ? 2 : 1;
  if (r.stage1) a.long_answer = it.long_answer;
  return a;
}

std::vector<json> StudyState::plan_assignment(const std::string& annotator_id, std::int64_t now_ms,
                                              std::optional<std::string>& reissued) const {
  reissued.reset();
  std::vector<json> events;
  std::set<std::size_t> released;
  if (config_.lease_seconds > 0) {
    const std::int64_t lease_ms = config_.lease_seconds * 1000;
    for (const auto& [who, idx] : open_) {
      if (now_ms - records_[idx].assigned_ms > lease_ms) {
        released.insert(idx);
        events.push_back(json{{"type", "release"}, {"assignment_id", records_[idx].assignment_id}, {"time", now_ms}});
      }
    }
    // Deterministic log order regardless of hash-map iteration.
    std::sort(events.begin(), events.end(), [this](const json& a, const json& b) {
      return record_index_.at(a["assignment_id"].get<std::string>()) <
             record_index_.at(b["assignment_id"].get<std::string>());
    });
  }
  if (auto it = open_.find(annotator_id); it != open_.end() && !released.count(it->second)) {
    reissued = records_[it->second].assignment_id;
    return events;
  }
  std::vector<std::size_t> occupancy(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) occupancy[c] = cells_[c].occupancy;
  for (auto idx : released) --occupancy[cell_index_.at({records_[idx].example_id, records_[idx].variant})];

  const std::set<std::string> none;
  auto seen_it = seen_.find(annotator_id);
  const auto& seen = seen_it == seen_.end() ? none : seen_it->second;
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    if (occupancy[c] >= config_.annotators_per_cell) continue;
    if (seen.count(items_[cells_[c].item].example_id)) continue;
    if (!best || occupancy[c] < occupancy[*best]) best = c;
  }
  if (best) {
    const auto& cell = cells_[*best];
    events.push_back(json{{"type", "assign"},
                          {"assignment_id", "a" + std::to_string(next_id_)},
                          {"annotator_id", annotator_id},
                          {"example_id", items_[cell.item].example_id},
                          {"variant", cell.variant},
                          {"time", now_ms}});
  }
  return events;
}

void StudyState::apply(const json& event) {
  if (!event.is_object()) throw DataError("log event must be an object");
  const std::string type = str_field(event, "type");
  const std::int64_t t = time_field(event);

  if (type == "assign") {
    const auto id = str_field(event, "assignment_id");
    const auto annotator = str_field(event, "annotator_id");
    const auto example = str_field(event, "example_id");
    const auto variant = str_field(event, "variant");
    if (blank(annotator)) throw DataError("blank annotator_id");
    if (record_index_.count(id)) throw ProtocolError("assignment '" + id + "' already exists");
    auto cell = cell_index_.find({example, variant});
    if (cell == cell_index_.end()) throw DataError("no cell (" + example + ", " + variant + ")");
    if (seen_[annotator].count(example)) {
      throw ProtocolError("annotator '" + annotator + "' already has a record for '" + example + "'");
    }
    if (open_.count(annotator)) throw ProtocolError("annotator '" + annotator + "' has an open assignment");
    if (cells_[cell->second].occupancy >= config_.annotators_per_cell) {
      throw ProtocolError("cell (" + example + ", " + variant + ") is full");
    }
    AnnotationRecord r;
    r.assignment_id = id;
    r.annotator_id = annotator;
    r.example_id = example;
    r.variant = variant;
    r.assigned_ms = t;
    record_index_[id] = records_.size();
    open_[annotator] = records_.size();
    records_.push_back(std::move(r));
    seen_[annotator].insert(example);
    ++cells_[cell->second].occupancy;
    // Keep generated ids ahead of any replayed "a<k>".
    if (id.size() > 1 && id[0] == 'a' && std::all_of(id.begin() + 1, id.end(), ::isdigit) && id.size() < 19) {
      next_id_ = std::max<std::size_t>(next_id_, std::stoull(id.substr(1)) + 1);
    }
  } else if (type == "stage1" || type == "stage2" || type == "release") {
    const auto id = str_field(event, "assignment_id");
    auto it = record_index_.find(id);
    if (it == record_index_.end()) throw UnknownAssignment("unknown assignment '" + id + "'");
    auto& r = records_[it->second];
    if (r.released) throw ProtocolError("assignment '" + id + "' expired");
    if (type == "stage1") {
      if (r.stage1) throw ProtocolError("stage 1 already submitted for '" + id + "'");
      Stage1 s{parse_yes_no(str_field(event, "fluency")), parse_ternary(str_field(event, "adequacy")), t};
      if (t < r.assigned_ms) throw DataError("stage 1 of '" + id + "' predates its assignment");
      r.stage1 = s;
    } else if (type == "stage2") {
      if (!r.stage1) throw ProtocolError("stage 2 before stage 1 for '" + id + "'");
      if (r.stage2) throw ProtocolError("stage 2 already submitted for '" + id + "'");
      Stage2 s{parse_yes_no(str_field(event, "faithfulness")), parse_ternary(str_field(event, "long_adequacy")), t};
      if (t < r.stage1->time_ms) throw DataError("stage 2 of '" + id + "' predates stage 1");
      r.stage2 = s;
      open_.erase(r.annotator_id);
    } else {
      if (r.stage2) throw ProtocolError("assignment '" + id + "' is complete");
      r.released = true;
      open_.erase(r.annotator_id);
      --cells_[cell_index_.at({r.example_id, r.variant})].occupancy;
    }
  } else if (type == "selection") {
    SelectionRecord s;
    s.annotator_id = str_field(event, "annotator_id");
    s.example_id = str_field(event, "example_id");
    s.time_ms = t;
    if (blank(s.annotator_id)) throw DataError("blank annotator_id");
    const auto n = sentences(s.example_id).size();
    const auto& sel = event.find("selected");
    if (sel == event.end() || !sel->is_array()) throw DataError("missing array field 'selected'");
    for (const auto& v : *sel) {
      if (!v.is_number_unsigned() || v.get<std::size_t>() >= n) {
        throw DataError(fmt::format("selected index {} outside [0, {})", v.dump(), n));
      }
      s.selected.insert(v.get<std::size_t>());
    }
    if (s.selected.empty()) throw DataError("a selection needs at least one sentence");
    for (const auto& prev : selections_) {
      if (prev.annotator_id == s.annotator_id && prev.example_id == s.example_id) {
        throw ProtocolError("selection already submitted by '" + s.annotator_id + "' for '" + s.example_id + "'");
      }
    }
    selections_.push_back(std::move(s));
  } else {
    throw DataError("unknown log event type '" + type + "'");
  }
  last_time_ = std::max(last_time_, t);
}

StudySnapshot StudyState::snapshot() const { return StudySnapshot{items_, config_, records_, selections_}; }

// ---------------------------------------------------------------------------
// Study

namespace {

StudyConfig config_from_header(const json& h) {
  StudyConfig c;
  c.annotators_per_cell = h.at("annotators_per_cell").get<std::size_t>();
  c.lease_seconds = h.value("lease_seconds", std::int64_t{0});
  c.instructions = h.value("instructions", json::object());
  return c;
}

StudyState state_from_header(const json& h) {
  if (!h.is_object() || h.value("type", "") != "study") throw DataError("study log must start with a study record");
  std::vector<StudyItem> items;
  for (const auto& j : h.at("items")) items.push_back(study_item_from_json(j));
  return StudyState(std::move(items), config_from_header(h));
}

struct Replay {
  StudyState state;
  std::vector<std::string> lines;
  std::uint64_t good_bytes = 0;
  bool torn = false;
};

Replay replay(std::istream& in) {
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::pair<std::string, std::uint64_t>> lines;  // line, offset after its newline
  std::size_t pos = 0;
  bool torn = false;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    if (nl == std::string::npos) {
      // A final line without newline is either complete JSON or torn.
      auto tail = content.substr(pos);
      if (json::accept(tail)) {
        lines.emplace_back(tail, content.size());
      } else {
        spdlog::warn("study log: dropping torn final record ({} bytes)", tail.size());
        torn = true;
      }
      break;
    }
    lines.emplace_back(content.substr(pos, nl - pos), nl + 1);
    pos = nl + 1;
  }
  std::size_t first = 0;
  while (first < lines.size() && blank(lines[first].first)) ++first;
  if (first == lines.size()) throw DataError("study log is empty");
  std::optional<StudyState> state;
  try {
    state.emplace(state_from_header(json::parse(lines[first].first)));
  } catch (const json::exception& e) {
    throw DataError(std::string("study log header: ") + e.what());
  }
  Replay r{std::move(*state), {lines[first].first}, lines[first].second, torn};
  for (std::size_t i = first + 1; i < lines.size(); ++i) {
    if (blank(lines[i].first)) continue;
    try {
      r.state.apply(json::parse(lines[i].first));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("study log line {}: {}", i + 1, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("study log line {}: {}", i + 1, e.what()));
    }
    r.lines.push_back(lines[i].first);
    r.good_bytes = lines[i].second;
  }
  if (!torn) r.good_bytes = content.size();
  return r;
}

}  // namespace

Study::Study(StudyState state, std::unique_ptr<std::ostream> sink, Clock clock)
    : state_(std::move(state)), sink_(std::move(sink)), clock_(clock ? std::move(clock) : Clock(system_now_ms)) {}

std::unique_ptr<Study> Study::create(std::vector<StudyItem> items, StudyConfig config,
                                     const std::filesystem::path& log_path, Clock clock) {
  StudyState state(std::move(items), std::move(config));
  std::unique_ptr<std::ostream> sink;
  if (!log_path.empty()) {
    std::error_code ec;
    if (std::filesystem::exists(log_path, ec) && std::filesystem::file_size(log_path, ec) > 0) {
      throw ConfigError("study log " + log_path.string() + " already exists");
    }
    auto f = std::make_unique<std::ofstream>(log_path, std::ios::binary | std::ios::app);
    if (!*f) throw ConfigError("cannot write study log " + log_path.string());
    sink = std::move(f);
  }
  std::unique_ptr<Study> study(new Study(std::move(state), std::move(sink), std::move(clock)));
  study->append(study->state_.header());
  return study;
}

std::unique_ptr<Study> Study::open(const std::filesystem::path& log_path, Clock clock) {
  std::ifstream in(log_path, std::ios::binary);
  if (!in) throw DataError("cannot read study log " + log_path.string());
  auto r = replay(in);
  in.close();
  if (r.torn) std::filesystem::resize_file(log_path, r.good_bytes);
  auto f = std::make_unique<std::ofstream>(log_path, std::ios::binary | std::ios::app);
  if (!*f) throw ConfigError("cannot append to study log " + log_path.string());
  std::unique_ptr<Study> study(new Study(std::move(r.state), std::move(f), std::move(clock)));
  study->log_ = std::move(r.lines);
  return study;
}

void Study::append(const json& event) {
  auto line = event.dump();
  if (sink_) {
    *sink_ << line << '\n';
    sink_->flush();
    if (!*sink_) throw DataError("failed to append to study log");
  }
  log_.push_back(std::move(line));
}

std::int64_t Study::now() { return std::max(clock_(), state_.last_time()); }

std::optional<Assignment> Study::assign_task(const std::string& annotator_id) {
  if (blank(annotator_id)) throw DataError("blank annotator id");
  std::lock_guard lock(mu_);
  std::optional<std::string> reissued;
  auto events = state_.plan_assignment(annotator_id, now(), reissued);
  for (const auto& e : events) {
    state_.apply(e);
    append(e);
  }
  if (reissued) return state_.view(*reissued);
  if (events.empty() || events.back()["type"] != "assign") return std::nullopt;
  return state_.view(events.back()["assignment_id"].get<std::string>());
}

std::string Study::submit_stage1(const std::string& assignment_id, YesNo fluency, Ternary adequacy) {
  std::lock_guard lock(mu_);
  json e{{"type", "stage1"},
         {"assignment_id", assignment_id},
         {"fluency", to_string(fluency)},
         {"adequacy", to_string(adequacy)},
         {"time", now()}};
  state_.apply(e);
  append(e);
  return state_.item(state_.record(assignment_id).example_id).long_answer;
}

void Study::submit_stage2(const std::string& assignment_id, YesNo faithfulness, Ternary long_adequacy) {
  std::lock_guard lock(mu_);
  json e{{"type", "stage2"},
         {"assignment_id", assignment_id},
         {"faithfulness", to_string(faithfulness)},
         {"long_adequacy", to_string(long_adequacy)},
         {"time", now()}};
  state_.apply(e);
  append(e);
}

void Study::submit_selection(const std::string& annotator_id, const std::string& example_id,
                             const std::set<std::size_t>& selected) {
  std::lock_guard lock(mu_);
  json e{{"type", "selection"},
         {"annotator_id", annotator_id},
         {"example_id", example_id},
         {"selected", selected},
         {"time", now()}};
  state_.apply(e);
  append(e);
}

std::pair<std::string, std::vector<std::string>> Study::selection_item(const std::string& example_id) const {
  std::lock_guard lock(mu_);
  return {state_.item(example_id).question, state_.sentences(example_id)};
}

StudySnapshot Study::snapshot() const {
  std::lock_guard lock(mu_);
  return state_.snapshot();
}

std::string Study::export_log() const {
  std::lock_guard lock(mu_);
  std::string out;
  for (const auto& line : log_) {
    out += line;
    out += '\n';
  }
  return out;
}

json Study::instructions() const {
  std::lock_guard lock(mu_);
  return state_.header()["instructions"];
}

std::size_t Study::annotators_per_cell() const {
  std::lock_guard lock(mu_);
  return state_.config().annotators_per_cell;
}

StudySnapshot load_study_log(std::istream& in) { return replay(in).state.snapshot(); }

StudySnapshot load_study_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read study log " + path.string());
  return load_study_log(in);
}

// ---------------------------------------------------------------------------
// Statistics

std::optional<double> fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts, std::size_t n) {
  if (counts.empty()) throw DataError("fleiss_kappa needs at least one item");
  if (n < 2) throw DataError("fleiss_kappa needs at least 2 raters per item");
  const std::size_t k = counts.front().size();
  std::vector<double> col(k, 0.0);
  double p_bar = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& row = counts[i];
    if (row.size() != k) throw DataError(fmt::format("row {} has {} categories, expected {}", i, row.size(), k));
    std::size_t sum = 0;
    double sq = 0;
    for (std::size_t j = 0; j < k; ++j) {
      sum += row[j];
      sq += static_cast<double>(row[j]) * row[j];
      col[j] += row[j];
    }
    if (sum != n) throw DataError(fmt::format("row {} sums to {}, expected {}", i, sum, n));
    p_bar += (sq - n) / (static_cast<double>(n) * (n - 1));
  }
  const double items = static_cast<double>(counts.size());
  p_bar /= items;
  double pe = 0;
  for (double c : col) {
    const double p = c / (items * n);
    pe += p * p;
  }
  if (std::abs(1.0 - pe) < 1e-12) return std::nullopt;
  return (p_bar - pe) / (1.0 - pe);
}

std::string to_string(AggregationMode mode) {
  return mode == AggregationMode::per_response ? "per-response" : "majority";
}

AggregationMode parse_mode(const std::string& name) {
  if (name == "per-response" || name == "per_response") return AggregationMode::per_response;
  if (name == "majority") return AggregationMode::majority;
  throw ConfigError("unknown aggregation mode '" + name + "' (per-response | majority)");
}

Ternary majority(const std::vector<Ternary>& labels) {
  std::array<std::size_t, 3> n{};
  for (auto l : labels) ++n[static_cast<std::size_t>(l)];
  const auto top = *std::max_element(n.begin(), n.end());
  if (std::count(n.begin(), n.end(), top) > 1) return Ternary::Partially;
  return static_cast<Ternary>(std::max_element(n.begin(), n.end()) - n.begin());
}

YesNo majority(const std::vector<YesNo>& labels) {
  const auto yes = std::count(labels.begin(), labels.end(), YesNo::Yes);
  return 2 * static_cast<std::size_t>(yes) > labels.size() ? YesNo::Yes : YesNo::No;
}

namespace {

struct CellResponses {
  std::vector<YesNo> fluency, faithfulness;
  std::vector<Ternary> adequacy, long_adequacy;

  std::size_t size() const { return fluency.size(); }
  bool functional() const {
    return majority(fluency) == YesNo::Yes && majority(adequacy) == Ternary::Yes &&
           majority(faithfulness) == YesNo::Yes;
  }
};

// (example, variant) -> complete responses, for the items in scope.
std::map<std::pair<std::string, std::string>, CellResponses> collect(const StudySnapshot& s,
                                                                     const std::optional<std::set<std::string>>& subset) {
  std::map<std::pair<std::string, std::string>, CellResponses> cells;
  std::set<std::string> known;
  for (const auto& item : s.items) {
    known.insert(item.example_id);
    if (subset && !subset->count(item.example_id)) continue;
    for (const auto& [tag, text] : item.variants) cells[{item.example_id, tag}];
  }
  if (subset) {
    for (const auto& id : *subset) {
      if (!known.count(id)) throw DataError("report subset names unknown example '" + id + "'");
    }
  }
  for (const auto& r : s.records) {
    if (!r.complete()) continue;
    auto it = cells.find({r.example_id, r.variant});
    if (it == cells.end()) continue;
    it->second.fluency.push_back(r.stage1->fluency);
    it->second.adequacy.push_back(r.stage1->adequacy);
    it->second.faithfulness.push_back(r.stage2->faithfulness);
    it->second.long_adequacy.push_back(r.stage2->long_adequacy);
  }
  return cells;
}

double pct(double num, double den) { return den > 0 ? 100.0 * num / den : 0.0; }

template <typename T>
std::vector<std::size_t> histogram(const std::vector<T>& labels, std::size_t k) {
  std::vector<std::size_t> h(k, 0);
  for (auto l : labels) ++h[static_cast<std::size_t>(l)];
  return h;
}

}  // namespace

Coverage coverage_analysis(const StudySnapshot& snapshot, const std::optional<std::set<std::string>>& subset) {
  const auto cells = collect(snapshot, subset);
  std::map<std::string, std::vector<Ternary>> pooled;
  std::map<std::string, bool> functional;
  for (const auto& [key, resp] : cells) {
    if (resp.size() == 0) continue;
    auto& p = pooled[key.first];
    p.insert(p.end(), resp.long_adequacy.begin(), resp.long_adequacy.end());
    functional[key.first] = functional[key.first] || resp.functional();
  }
  Coverage c;
  for (const auto& [id, labels] : pooled) {
    if (majority(labels) != Ternary::Yes) continue;
    ++c.adequate_examples;
    if (functional[id]) ++c.covered_examples;
  }
  if (c.adequate_examples > 0) c.percent = pct(c.covered_examples, c.adequate_examples);
  return c;
}

StudyReport aggregate_report(const StudySnapshot& snapshot, const ReportOptions& options) {
  const auto cells = collect(snapshot, options.subset);
  const std::size_t apc = snapshot.config.annotators_per_cell;
  StudyReport report;
  report.mode = options.mode;
  report.partial = options.partial;

  for (const auto& [key, resp] : cells) {
    if (resp.size() < apc && !options.partial) {
      throw DataError(fmt::format("cell ({}, {}) has {} of {} complete annotations; pass the partial flag to report anyway",
                                  key.first, key.second, resp.size(), apc));
    }
  }

  std::map<std::string, VariantReport> by_variant;
  std::array<std::vector<std::vector<std::size_t>>, 4> kappa_rows;
  for (const auto& [key, resp] : cells) {
    auto& v = by_variant[key.second];
    v.variant = key.second;
    if (resp.size() == 0) continue;
    ++v.cells;
    v.responses += resp.size();
    if (options.mode == AggregationMode::per_response) {
      for (std::size_t i = 0; i < resp.size(); ++i) {
        v.fluency += resp.fluency[i] == YesNo::Yes;
        v.adequacy[static_cast<std::size_t>(resp.adequacy[i])] += 1;
        v.faithfulness += resp.faithfulness[i] == YesNo::Yes;
        v.long_adequacy[static_cast<std::size_t>(resp.long_adequacy[i])] += 1;
        v.functional += resp.fluency[i] == YesNo::Yes && resp.adequacy[i] == Ternary::Yes &&
                        resp.faithfulness[i] == YesNo::Yes;
      }
    } else {
      v.fluency += majority(resp.fluency) == YesNo::Yes;
      v.adequacy[static_cast<std::size_t>(majority(resp.adequacy))] += 1;
      v.faithfulness += majority(resp.faithfulness) == YesNo::Yes;
      v.long_adequacy[static_cast<std::size_t>(majority(resp.long_adequacy))] += 1;
      v.functional += resp.functional();
    }
    if (resp.size() == apc) {
      kappa_rows[0].push_back(histogram(resp.fluency, 2));
      kappa_rows[1].push_back(histogram(resp.adequacy, 3));
      kappa_rows[2].push_back(histogram(resp.faithfulness, 2));
      kappa_rows[3].push_back(histogram(resp.long_adequacy, 3));
    }
  }
  for (auto& [tag, v] : by_variant) {
    const double den = options.mode == AggregationMode::per_response ? v.responses : v.cells;
    v.fluency = pct(v.fluency, den);
    v.faithfulness = pct(v.faithfulness, den);
    v.functional = pct(v.functional, den);
    for (auto& x : v.adequacy) x = pct(x, den);
    for (auto& x : v.long_adequacy) x = pct(x, den);
    report.variants.push_back(v);
  }
  if (apc >= 2) {
    for (std::size_t q = 0; q < 4; ++q) {
      if (!kappa_rows[q].empty()) report.kappa[q] = fleiss_kappa(kappa_rows[q], apc);
    }
  }
  const auto cov = coverage_analysis(snapshot, options.subset);
  report.coverage = cov.percent;
  report.adequate_examples = cov.adequate_examples;
  report.covered_examples = cov.covered_examples;
  return report;
}

std::optional<TTest> paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError(fmt::format("paired samples differ in length ({} vs {})", a.size(), b.size()));
  if (a.size() < 2) throw DataError("paired t-test needs at least 2 pairs");
  const double n = static_cast<double>(a.size());
  double mean = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  const double sd = std::sqrt(ss / (n - 1));
  if (!(sd > 1e-12)) return std::nullopt;
  TTest r;
  r.df = a.size() - 1;
  r.t = mean / (sd / std::sqrt(n));
  boost::math::students_t dist(static_cast<double>(r.df));
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

double mcnemar(std::size_t b, std::size_t c) {
  const std::size_t n = b + c;
  if (n == 0) return 1.0;
  boost::math::binomial_distribution<double> dist(static_cast<double>(n), 0.5);
  return std::min(1.0, 2.0 * boost::math::cdf(dist, static_cast<double>(std::min(b, c))));
}

VariantComparison compare_variants(const StudySnapshot& snapshot, const std::string& a, const std::string& b) {
  const auto cells = collect(snapshot, std::nullopt);
  VariantComparison cmp;
  cmp.a = a;
  cmp.b = b;
  std::vector<double> sa, sb;
  auto mean_score = [](const CellResponses& r) {
    double s = 0;
    for (auto l : r.adequacy) s += adequacy_score(to_string(l));
    return s / r.size();
  };
  for (const auto& item : snapshot.items) {
    auto ia = cells.find({item.example_id, a});
    auto ib = cells.find({item.example_id, b});
    if (ia == cells.end() || ib == cells.end() || ia->second.size() == 0 || ib->second.size() == 0) continue;
    ++cmp.examples;
    sa.push_back(mean_score(ia->second));
    sb.push_back(mean_score(ib->second));
    const bool fa = ia->second.functional(), fb = ib->second.functional();
    cmp.functional_a_only += fa && !fb;
    cmp.functional_b_only += fb && !fa;
  }
  if (cmp.examples >= 2) cmp.adequacy = paired_t_test(sa, sb);
  cmp.mcnemar_p = mcnemar(cmp.functional_a_only, cmp.functional_b_only);
  return cmp;
}

json to_json(const StudyReport& report) {
  json variants = json::array();
  for (const auto& v : report.variants) {
    variants.push_back(json{{"variant", v.variant},
                            {"cells", v.cells},
                            {"responses", v.responses},
                            {"fluency", v.fluency},
                            {"adequacy", {{"Yes", v.adequacy[0]}, {"Partially", v.adequacy[1]}, {"No", v.adequacy[2]}}},
                            {"faithfulness", v.faithfulness},
                            {"long_adequacy",
                             {{"Yes", v.long_adequacy[0]}, {"Partially", v.long_adequacy[1]}, {"No", v.long_adequacy[2]}}},
                            {"functional", v.functional}});
  }
  json kappa = json::object();
  for (std::size_t q = 0; q < 4; ++q) kappa[kStudyQuestions[q]] = report.kappa[q] ? json(*report.kappa[q]) : json();
  return json{{"mode", to_string(report.mode)},
              {"partial", report.partial},
              {"variants", std::move(variants)},
              {"kappa", std::move(kappa)},
              {"coverage",
               {{"percent", report.coverage ? json(*report.coverage) : json()},
                {"adequate_examples", report.adequate_examples},
                {"covered_examples", report.covered_examples}}}};
}

namespace {

void render_one(std::string& out, const StudyReport& r) {
  out += fmt::format("[{}]\n", to_string(r.mode));
  out += fmt::format("{:<20} {:>5} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n", "variant", "cells",
                     "Flu", "Adq-Y", "Adq-P", "Adq-N", "Faith", "Long-Y", "Long-P", "Long-N", "Func");
  for (const auto& v : r.variants) {
    out += fmt::format("{:<20} {:>5} {:>6.1f} {:>6.1f} {:>6.1f} {:>6.1f} {:>6.1f} {:>6.1f} {:>6.1f} {:>6.1f} {:>6.1f}\n",
                       v.variant, v.cells, v.fluency, v.adequacy[0], v.adequacy[1], v.adequacy[2], v.faithfulness,
                       v.long_adequacy[0], v.long_adequacy[1], v.long_adequacy[2], v.functional);
  }
}

}  // namespace

std::string render_study_report(const StudyReport& per_response, const StudyReport& majority_report) {
  std::string out;
  render_one(out, per_response);
  out += '\n';
  render_one(out, majority_report);
  out += "\nFleiss' kappa:";
  for (std::size_t q = 0; q < 4; ++q) {
    out += fmt::format(" {}={}", kStudyQuestions[q],
                       per_response.kappa[q] ? fmt::format("{:.3f}", *per_response.kappa[q]) : "undefined");
  }
  out += '\n';
  if (per_response.coverage) {
    out += fmt::format("coverage: {:.1f}% ({} of {} adequate long answers)\n", *per_response.coverage,
                       per_response.covered_examples, per_response.adequate_examples);
  } else {
    out += "coverage: undefined (no adequate long answers)\n";
  }
  return out;
}

}  // namespace lfqa
