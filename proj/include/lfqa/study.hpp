#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lfqa/errors.hpp"

namespace lfqa {

/// Answers to the binary questions (fluency, faithfulness).
enum class YesNo { Yes, No };
/// Answers to the adequacy questions.
enum class Ternary { Yes, Partially, No };

std::string to_string(YesNo v);
std::string to_string(Ternary v);
/// Exact, case-sensitive labels. Throw DataError otherwise.
YesNo parse_yes_no(const std::string& label);
Ternary parse_ternary(const std::string& label);

/// Yes -> 1.0, Partially -> 0.5, No -> 0.0. Throws DataError on anything else.
double adequacy_score(const std::string& label);

struct StudyItem {
  std::string example_id;
  std::string question;
  std::string long_answer;
  /// Variant tag -> summary text shown in stage 1.
  std::map<std::string, std::string> variants;
  /// Sentences offered by the selection interface. Split from long_answer
  /// when left empty.
  std::vector<std::string> answer_sentences;

  friend bool operator==(const StudyItem&, const StudyItem&) = default;
};

/// Throws DataError for a blank id, question or long answer, no variants, or
/// an empty variant text.
void validate(const StudyItem& item);

nlohmann::json to_json(const StudyItem& item);
StudyItem study_item_from_json(const nlohmann::json& record);
/// JSONL, one item per line.
std::vector<StudyItem> read_study_items(std::istream& in);

struct Stage1 {
  YesNo fluency = YesNo::Yes;
  Ternary adequacy = Ternary::Yes;
  std::int64_t time_ms = 0;
};

struct Stage2 {
  YesNo faithfulness = YesNo::Yes;
  Ternary long_adequacy = Ternary::Yes;
  std::int64_t time_ms = 0;
};

struct AnnotationRecord {
  std::string assignment_id;
  std::string annotator_id;
  std::string example_id;
  std::string variant;
  std::int64_t assigned_ms = 0;
  std::optional<Stage1> stage1;
  std::optional<Stage2> stage2;
  bool released = false;  // lease expired before completion

  bool complete() const { return stage2.has_value() && !released; }
};

struct SelectionRecord {
  std::string annotator_id;
  std::string example_id;
  std::set<std::size_t> selected;
  std::int64_t time_ms = 0;
};

struct StudyConfig {
  std::size_t annotators_per_cell = 3;
  /// Open assignments older than this are released on the next assignment
  /// request. Zero disables expiry.
  std::int64_t lease_seconds = 0;
  /// Free-form text for the annotation client, passed through verbatim.
  nlohmann::json instructions = nlohmann::json::object();
};

/// Everything a report needs: the study definition and its records, in log order.
struct StudySnapshot {
  std::vector<StudyItem> items;
  StudyConfig config;
  std::vector<AnnotationRecord> records;
  std::vector<SelectionRecord> selections;

  std::size_t cell_count() const;
  std::size_t required_annotations() const { return cell_count() * config.annotators_per_cell; }
};

/// Unknown assignment id.
class UnknownAssignment : public DataError {
 public:
  using DataError::DataError;
};

/// Out-of-order or repeated submission. The stored record is untouched.
class ProtocolError : public DataError {
 public:
  using DataError::DataError;
};

struct Assignment {
  std::string assignment_id;
  std::string example_id;
  std::string variant;
  std::string question;
  std::string summary_text;
  int stage = 1;  // next stage to submit
  /// Present only once stage 1 has been acknowledged.
  std::optional<std::string> long_answer;
};

/// Wire body for GET /api/task. The long answer appears only at stage 2.
nlohmann::json to_json(const Assignment& assignment);

/// Pure fold over study log events. Not thread-safe; Study serializes access.
class StudyState {
 public:
  StudyState(std::vector<StudyItem> items, StudyConfig config);

  /// The log's first record.
  nlohmann::json header() const;
  /// Applies one event, validating it against the current state. Throws
  /// ProtocolError, UnknownAssignment or DataError without changing state.
  void apply(const nlohmann::json& event);

  /// Events that assign_task would append for `annotator_id` at `now_ms`
  /// (lease releases followed by an assignment), or the re-issued open one.
  std::vector<nlohmann::json> plan_assignment(const std::string& annotator_id, std::int64_t now_ms,
                                              std::optional<std::string>& reissued) const;

  Assignment view(const std::string& assignment_id) const;
  const AnnotationRecord& record(const std::string& assignment_id) const;
  const StudyItem& item(const std::string& example_id) const;
  std::vector<std::string> sentences(const std::string& example_id) const;
  StudySnapshot snapshot() const;
  std::int64_t last_time() const { return last_time_; }
  const StudyConfig& config() const { return config_; }

 private:
  struct Cell {
    std::size_t item;
    std::string variant;
    std::size_t occupancy = 0;  // live records, open or complete
  };

  std::vector<StudyItem> items_;
  StudyConfig config_;
  std::unordered_map<std::string, std::size_t> item_index_;
  std::vector<Cell> cells_;
  std::map<std::pair<std::string, std::string>, std::size_t> cell_index_;
  std::vector<AnnotationRecord> records_;
  std::unordered_map<std::string, std::size_t> record_index_;
  std::unordered_map<std::string, std::set<std::string>> seen_;       // annotator -> example ids
  std::unordered_map<std::string, std::size_t> open_;                 // annotator -> record
  std::vector<SelectionRecord> selections_;
  std::int64_t last_time_ = 0;
  std::size_t next_id_ = 1;
};

/// A study backed by an append-only JSONL log. Every operation holds one
/// mutex, so assignment and submission are linearizable and snapshots are
/// consistent.
class Study {
 public:
  using Clock = std::function<std::int64_t()>;  // milliseconds

  /// New study. Throws DataError for no items, duplicate ids or invalid
  /// items; ConfigError for annotators_per_cell == 0 or an existing
  /// non-empty log. An empty `log_path` keeps the log in memory only.
  static std::unique_ptr<Study> create(std::vector<StudyItem> items, StudyConfig config,
                                       const std::filesystem::path& log_path = {}, Clock clock = {});
  /// Replays an existing log and keeps appending to it. A torn final line
  /// (no trailing newline) is dropped with a warning.
  static std::unique_ptr<Study> open(const std::filesystem::path& log_path, Clock clock = {});

  std::optional<Assignment> assign_task(const std::string& annotator_id);
  /// Returns the long answer.
  std::string submit_stage1(const std::string& assignment_id, YesNo fluency, Ternary adequacy);
  void submit_stage2(const std::string& assignment_id, YesNo faithfulness, Ternary long_adequacy);
  void submit_selection(const std::string& annotator_id, const std::string& example_id,
                        const std::set<std::size_t>& selected);

  /// Question and sentences for the selection interface.
  std::pair<std::string, std::vector<std::string>> selection_item(const std::string& example_id) const;

  StudySnapshot snapshot() const;
  /// The full log as JSONL.
  std::string export_log() const;
  nlohmann::json instructions() const;
  std::size_t annotators_per_cell() const;

 private:
  Study(StudyState state, std::unique_ptr<std::ostream> sink, Clock clock);
  void append(const nlohmann::json& event);
  std::int64_t now();

  mutable std::mutex mu_;
  StudyState state_;
  std::unique_ptr<std::ostream> sink_;
  std::vector<std::string> log_;
  Clock clock_;
};

/// Replays a log into a snapshot without opening it for writing.
StudySnapshot load_study_log(std::istream& in);
StudySnapshot load_study_log(const std::filesystem::path& path);

/// nullopt marks the degenerate case P̄e = 1. Throws DataError when a row
/// does not sum to n, n < 2, or there are no rows.
std::optional<double> fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts, std::size_t n);

enum class AggregationMode { per_response, majority };

std::string to_string(AggregationMode mode);
AggregationMode parse_mode(const std::string& name);

/// Plurality label; any tie resolves to Partially.
Ternary majority(const std::vector<Ternary>& labels);
/// Strict majority of Yes; ties resolve to No.
YesNo majority(const std::vector<YesNo>& labels);

struct VariantReport {
  std::string variant;
  std::size_t cells = 0;
  std::size_t responses = 0;
  double fluency = 0;
  std::array<double, 3> adequacy{};       // Yes, Partially, No
  double faithfulness = 0;
  std::array<double, 3> long_adequacy{};  // Yes, Partially, No
  /// Majority mode: fluent, adequate (Yes) and faithful by majority per cell.
  /// Per-response mode: the same conjunction per response.
  double functional = 0;
};

inline constexpr std::array<const char*, 4> kStudyQuestions = {"fluency", "adequacy", "faithfulness",
                                                               "long_adequacy"};

struct StudyReport {
  AggregationMode mode = AggregationMode::per_response;
  bool partial = false;
  std::vector<VariantReport> variants;  // sorted by tag
  /// Per question, over cells holding exactly annotators_per_cell responses.
  std::array<std::optional<double>, 4> kappa{};
  std::optional<double> coverage;  // percent; none when no long answer is adequate
  std::size_t adequate_examples = 0;
  std::size_t covered_examples = 0;
};

struct ReportOptions {
  AggregationMode mode = AggregationMode::per_response;
  /// Restrict to these example ids.
  std::optional<std::set<std::string>> subset;
  /// Aggregate whatever is complete instead of failing on open cells.
  bool partial = false;
};

/// Throws DataError when a cell in scope lacks complete records and
/// `partial` is off.
StudyReport aggregate_report(const StudySnapshot& snapshot, const ReportOptions& options);

struct Coverage {
  std::size_t adequate_examples = 0;
  std::size_t covered_examples = 0;
  std::optional<double> percent;
};

/// Among examples whose pooled long-answer adequacy is Yes by majority, the
/// share with at least one majority-functional variant.
Coverage coverage_analysis(const StudySnapshot& snapshot, const std::optional<std::set<std::string>>& subset = {});

struct TTest {
  double t = 0;
  double p = 1;
  std::size_t df = 0;
};

/// Two-sided paired t-test. nullopt when the differences have zero
/// variance. Throws DataError on unequal lengths or fewer than 2 pairs.
std::optional<TTest> paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

/// Exact two-sided McNemar p from the discordant counts.
double mcnemar(std::size_t b, std::size_t c);

struct VariantComparison {
  std::string a, b;
  std::size_t examples = 0;
  std::optional<TTest> adequacy;  // per-example mean adequacy score
  std::size_t functional_a_only = 0, functional_b_only = 0;
  double mcnemar_p = 1;
};

/// Paired over examples where both variants have complete cells.
VariantComparison compare_variants(const StudySnapshot& snapshot, const std::string& a, const std::string& b);

nlohmann::json to_json(const StudyReport& report);
/// Both modes side by side.
std::string render_study_report(const StudyReport& per_response, const StudyReport& majority);

}  // namespace lfqa
