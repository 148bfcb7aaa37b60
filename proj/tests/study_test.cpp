#include <doctest.h>

#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "lfqa/study.hpp"
#include "support.hpp"

using namespace lfqa;
using namespace lfqa::testing;
using nlohmann::json;

namespace {

std::vector<StudyItem> make_items(std::size_t n, const std::vector<std::string>& variants) {
  std::vector<StudyItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    StudyItem it;
    it.example_id = "ex" + std::to_string(i);
    it.question = "Question " + std::to_string(i) + "?";
    it.long_answer = "Long answer " + std::to_string(i) + ". It has two sentences.";
    for (const auto& v : variants) it.variants[v] = v + " summary of " + std::to_string(i) + ".";
    items.push_back(std::move(it));
  }
  return items;
}

struct Labels {
  YesNo fluency = YesNo::Yes;
  Ternary adequacy = Ternary::Yes;
  YesNo faithfulness = YesNo::Yes;
  Ternary long_adequacy = Ternary::Yes;
};

using Responder = std::function<Labels(const Assignment&, const std::string& annotator)>;

/// Drives annotators w0, w1, ... until every cell is full.
void complete_study(Study& study, const Responder& respond) {
  for (int w = 0; w < 1000; ++w) {
    const std::string who = "w" + std::to_string(w);
    bool any = false;
    while (auto a = study.assign_task(who)) {
      any = true;
      const auto l = respond(*a, who);
      study.submit_stage1(a->assignment_id, l.fluency, l.adequacy);
      study.submit_stage2(a->assignment_id, l.faithfulness, l.long_adequacy);
    }
    if (!any) return;
  }
}

Labels all_yes(const Assignment&, const std::string&) { return {}; }

struct FakeClock {
  std::shared_ptr<std::atomic<std::int64_t>> t = std::make_shared<std::atomic<std::int64_t>>(1000);
  Study::Clock fn() const {
    return [t = t] { return t->load(); };
  }
};

// Independent aggregation over raw records.
struct Expected {
  double fluency = 0, adequacy_yes = 0, functional = 0;
};

Expected expected_for(const StudySnapshot& s, const std::string& variant, AggregationMode mode) {
  std::map<std::string, std::vector<const AnnotationRecord*>> cells;
  for (const auto& r : s.records) {
    if (r.complete() && r.variant == variant) cells[r.example_id].push_back(&r);
  }
  Expected e;
  double den = 0;
  for (const auto& [id, rs] : cells) {
    if (mode == AggregationMode::per_response) {
      for (const auto* r : rs) {
        den += 1;
        const bool flu = r->stage1->fluency == YesNo::Yes;
        const bool adq = r->stage1->adequacy == Ternary::Yes;
        const bool fai = r->stage2->faithfulness == YesNo::Yes;
        e.fluency += flu;
        e.adequacy_yes += adq;
        e.functional += flu && adq && fai;
      }
    } else {
      den += 1;
      int flu = 0, fai = 0;
      int adq[3] = {0, 0, 0};
      for (const auto* r : rs) {
        flu += r->stage1->fluency == YesNo::Yes;
        fai += r->stage2->faithfulness == YesNo::Yes;
        ++adq[static_cast<int>(r->stage1->adequacy)];
      }
      const int n = static_cast<int>(rs.size());
      const bool mflu = 2 * flu > n, mfai = 2 * fai > n;
      const int top = std::max({adq[0], adq[1], adq[2]});
      const bool tie = (adq[0] == top) + (adq[1] == top) + (adq[2] == top) > 1;
      const bool madq = !tie && adq[0] == top;
      e.fluency += mflu;
      e.adequacy_yes += madq;
      e.functional += mflu && madq && mfai;
    }
  }
  e.fluency *= 100.0 / den;
  e.adequacy_yes *= 100.0 / den;
  e.functional *= 100.0 / den;
  return e;
}

// Student t CDF for three degrees of freedom in closed form.
double t3_cdf(double t) {
  const double x = t / std::sqrt(3.0);
  return 0.5 + (x / (1 + x * x) + std::atan(x)) / std::numbers::pi;
}

}  // namespace

TEST_SUITE("study") {

TEST_CASE("label parsing and adequacy scores") {
  CHECK(parse_yes_no("Yes") == YesNo::Yes);
  CHECK(parse_ternary("Partially") == Ternary::Partially);
  CHECK_THROWS_AS(parse_yes_no("yes"), DataError);
  CHECK_THROWS_AS(parse_ternary("Maybe"), DataError);
  CHECK(adequacy_score("Yes") == 1.0);
  CHECK(adequacy_score("Partially") == 0.5);
  CHECK(adequacy_score("No") == 0.0);
  CHECK_THROWS_AS(adequacy_score("Perhaps"), DataError);
}

TEST_CASE("creating a study") {
  auto big = Study::create(make_items(175, {"gold", "gold_decontext", "abstractive_a", "abstractive_b"}), {});
  CHECK(big->snapshot().required_annotations() == 2100);
  auto one = Study::create(make_items(1, {"gold"}), StudyConfig{1, 0, json::object()});
  CHECK(one->snapshot().cell_count() == 1);
  CHECK_THROWS_AS(Study::create({}, {}), DataError);
  auto dup = make_items(2, {"gold"});
  dup[1].example_id = dup[0].example_id;
  CHECK_THROWS_AS(Study::create(dup, {}), DataError);
  CHECK_THROWS_AS(Study::create(make_items(1, {"gold"}), StudyConfig{0, 0, json::object()}), ConfigError);
  auto blank = make_items(1, {"gold"});
  blank[0].variants["gold"] = "  ";
  CHECK_THROWS_AS(Study::create(blank, {}), DataError);
}

TEST_CASE("an annotator never sees an example twice") {
  auto study = Study::create(make_items(3, {"gold", "abs"}), {});
  std::set<std::string> seen;
  while (auto a = study->assign_task("solo")) {
    CHECK(seen.insert(a->example_id).second);
    CHECK_FALSE(a->long_answer.has_value());
    CHECK(a->stage == 1);
    study->submit_stage1(a->assignment_id, YesNo::Yes, Ternary::Yes);
    study->submit_stage2(a->assignment_id, YesNo::Yes, Ternary::Yes);
  }
  CHECK(seen.size() == 3);
}

TEST_CASE("open assignments are re-issued") {
  auto study = Study::create(make_items(2, {"gold"}), {});
  auto a = study->assign_task("w");
  auto b = study->assign_task("w");
  REQUIRE(a);
  REQUIRE(b);
  CHECK(a->assignment_id == b->assignment_id);
  const auto long_answer = study->submit_stage1(a->assignment_id, YesNo::Yes, Ternary::No);
  auto c = study->assign_task("w");
  CHECK(c->stage == 2);
  CHECK(c->long_answer == long_answer);
  CHECK(to_json(*c).contains("long_answer"));
  CHECK_FALSE(to_json(*a).contains("long_answer"));
}

TEST_CASE("two requests for the last cell") {
  for (int round = 0; round < 50; ++round) {
    auto study = Study::create(make_items(1, {"gold"}), StudyConfig{1, 0, json::object()});
    std::optional<Assignment> x, y;
    std::thread t1([&] { x = study->assign_task("alice"); });
    std::thread t2([&] { y = study->assign_task("bob"); });
    t1.join();
    t2.join();
    CHECK(x.has_value() != y.has_value());
  }
}

TEST_CASE("many concurrent annotators fill every cell exactly") {
  TempDir dir;
  auto study = Study::create(make_items(10, {"gold", "abs"}), {}, dir / "log.jsonl");
  std::vector<std::thread> threads;
  for (int w = 0; w < 100; ++w) {
    threads.emplace_back([&, w] {
      const std::string who = "ann" + std::to_string(w);
      while (auto a = study->assign_task(who)) {
        study->submit_stage1(a->assignment_id, YesNo::Yes, Ternary::Partially);
        study->submit_stage2(a->assignment_id, YesNo::No, Ternary::Yes);
      }
    });
  }
  for (auto& t : threads) t.join();

  auto snap = load_study_log(dir / "log.jsonl");
  CHECK(snap.records.size() == 60);
  std::map<std::pair<std::string, std::string>, std::set<std::string>> cells;
  std::set<std::pair<std::string, std::string>> annotator_examples;
  for (const auto& r : snap.records) {
    CHECK(r.complete());
    CHECK(cells[{r.example_id, r.variant}].insert(r.annotator_id).second);
    CHECK(annotator_examples.insert({r.annotator_id, r.example_id}).second);
  }
  CHECK(cells.size() == 20);
  for (const auto& [cell, who] : cells) CHECK(who.size() == 3);
}

TEST_CASE("protocol errors leave records untouched") {
  auto study = Study::create(make_items(1, {"gold"}), {});
  auto a = study->assign_task("w");
  CHECK_THROWS_AS(study->submit_stage2(a->assignment_id, YesNo::Yes, Ternary::Yes), ProtocolError);
  CHECK_THROWS_AS(study->submit_stage1("a999", YesNo::Yes, Ternary::Yes), UnknownAssignment);
  study->submit_stage1(a->assignment_id, YesNo::No, Ternary::No);
  CHECK_THROWS_AS(study->submit_stage1(a->assignment_id, YesNo::Yes, Ternary::Yes), ProtocolError);
  study->submit_stage2(a->assignment_id, YesNo::Yes, Ternary::Partially);
  CHECK_THROWS_AS(study->submit_stage2(a->assignment_id, YesNo::No, Ternary::No), ProtocolError);
  const auto rec = study->snapshot().records.at(0);
  CHECK(rec.stage1->fluency == YesNo::No);
  CHECK(rec.stage2->long_adequacy == Ternary::Partially);
  CHECK(rec.stage1->time_ms <= rec.stage2->time_ms);
  CHECK_THROWS_AS(study->assign_task("  "), DataError);
}

TEST_CASE("fleiss kappa") {
  // Hand evaluation: P = (1 + 1/3 + 1)/3 = 7/9, Pe = (5/9)^2 + (4/9)^2 = 41/81.
  auto k = fleiss_kappa({{3, 0}, {2, 1}, {0, 3}}, 3);
  REQUIRE(k);
  CHECK(*k == doctest::Approx((7.0 / 9.0 - 41.0 / 81.0) / (1.0 - 41.0 / 81.0)));
  CHECK(*k == doctest::Approx(0.55));
  CHECK(*fleiss_kappa({{3, 0, 0}, {0, 3, 0}, {0, 0, 3}}, 3) == doctest::Approx(1.0));
  CHECK_FALSE(fleiss_kappa({{3, 0}, {3, 0}}, 3).has_value());
  CHECK_THROWS_AS(fleiss_kappa({{2, 0}}, 3), DataError);
  CHECK_THROWS_AS(fleiss_kappa({{1, 0}}, 1), DataError);
  CHECK_THROWS_AS(fleiss_kappa({}, 3), DataError);
}

TEST_CASE("fleiss kappa under permutations") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t items = 2 + rng() % 10, cats = 2 + rng() % 3, n = 2 + rng() % 4;
    std::vector<std::vector<std::size_t>> m(items, std::vector<std::size_t>(cats, 0));
    for (auto& row : m) {
      for (std::size_t r = 0; r < n; ++r) ++row[rng() % cats];
    }
    const auto k = fleiss_kappa(m, n);
    auto rows = m;
    std::shuffle(rows.begin(), rows.end(), rng);
    std::vector<std::size_t> perm(cats);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (auto& row : rows) {
      auto copy = row;
      for (std::size_t j = 0; j < cats; ++j) row[perm[j]] = copy[j];
    }
    const auto k2 = fleiss_kappa(rows, n);
    REQUIRE(k.has_value() == k2.has_value());
    if (k) CHECK(*k == doctest::Approx(*k2));

    // Perfect agreement with at least two categories used.
    std::vector<std::vector<std::size_t>> perfect(items, std::vector<std::size_t>(cats, 0));
    for (std::size_t i = 0; i < items; ++i) perfect[i][i % 2] = n;
    CHECK(*fleiss_kappa(perfect, n) == doctest::Approx(1.0));
  }
}

TEST_CASE("majority rules") {
  CHECK(majority(std::vector<Ternary>{Ternary::Yes, Ternary::Yes, Ternary::No}) == Ternary::Yes);
  CHECK(majority(std::vector<Ternary>{Ternary::Yes, Ternary::Partially, Ternary::No}) == Ternary::Partially);
  CHECK(majority(std::vector<Ternary>{Ternary::Yes, Ternary::No}) == Ternary::Partially);
  CHECK(majority(std::vector<YesNo>{YesNo::Yes, YesNo::No, YesNo::Yes}) == YesNo::Yes);
  CHECK(majority(std::vector<YesNo>{YesNo::Yes, YesNo::No}) == YesNo::No);
  CHECK(parse_mode("per-response") == AggregationMode::per_response);
  CHECK(parse_mode("majority") == AggregationMode::majority);
  CHECK_THROWS_AS(parse_mode("mean"), ConfigError);
}

TEST_CASE("all-fluent study") {
  auto study = Study::create(make_items(2, {"gold"}), {});
  complete_study(*study, all_yes);
  for (auto mode : {AggregationMode::per_response, AggregationMode::majority}) {
    auto r = aggregate_report(study->snapshot(), {mode, std::nullopt, false});
    REQUIRE(r.variants.size() == 1);
    CHECK(r.variants[0].fluency == 100.0);
    CHECK(r.variants[0].functional == 100.0);
    CHECK(r.coverage == 100.0);
  }
}

TEST_CASE("majority adequacy from two of three") {
  auto study = Study::create(make_items(1, {"gold"}), {});
  complete_study(*study, [](const Assignment&, const std::string& who) {
    Labels l;
    if (who == "w2") l.adequacy = Ternary::No;
    return l;
  });
  auto maj = aggregate_report(study->snapshot(), {AggregationMode::majority, std::nullopt, false});
  CHECK(maj.variants[0].adequacy[0] == 100.0);
  auto per = aggregate_report(study->snapshot(), {AggregationMode::per_response, std::nullopt, false});
  CHECK(per.variants[0].adequacy[0] == doctest::Approx(200.0 / 3.0));
  CHECK(per.variants[0].adequacy[2] == doctest::Approx(100.0 / 3.0));
}

TEST_CASE("aggregation agrees with a recount over random studies") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    auto study = Study::create(make_items(2 + rng() % 6, {"gold", "abs", "decon"}), {});
    std::mutex mu;
    complete_study(*study, [&](const Assignment&, const std::string&) {
      std::lock_guard lock(mu);
      Labels l;
      l.fluency = rng() % 4 ? YesNo::Yes : YesNo::No;
      l.adequacy = static_cast<Ternary>(rng() % 3);
      l.faithfulness = rng() % 3 ? YesNo::Yes : YesNo::No;
      l.long_adequacy = static_cast<Ternary>(rng() % 3);
      return l;
    });
    const auto snap = study->snapshot();
    for (auto mode : {AggregationMode::per_response, AggregationMode::majority}) {
      auto r = aggregate_report(snap, {mode, std::nullopt, false});
      REQUIRE(r.variants.size() == 3);
      for (const auto& v : r.variants) {
        const auto e = expected_for(snap, v.variant, mode);
        CHECK(v.fluency == doctest::Approx(e.fluency));
        CHECK(v.adequacy[0] == doctest::Approx(e.adequacy_yes));
        CHECK(v.functional == doctest::Approx(e.functional));
        CHECK(v.adequacy[0] + v.adequacy[1] + v.adequacy[2] == doctest::Approx(100.0).epsilon(0.001));
        CHECK(v.long_adequacy[0] + v.long_adequacy[1] + v.long_adequacy[2] == doctest::Approx(100.0).epsilon(0.001));
        CHECK(v.functional <= std::min({v.fluency, v.adequacy[0], v.faithfulness}) + 1e-9);
      }
      for (const auto& k : r.kappa) {
        if (k) CHECK(*k <= 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("coverage extremes") {
  auto good = Study::create(make_items(3, {"gold", "abs"}), {});
  complete_study(*good, all_yes);
  auto cov = coverage_analysis(good->snapshot());
  CHECK(cov.adequate_examples == 3);
  CHECK(cov.percent == 100.0);

  auto bad = Study::create(make_items(3, {"gold", "abs"}), {});
  complete_study(*bad, [](const Assignment&, const std::string&) {
    Labels l;
    l.faithfulness = YesNo::No;
    return l;
  });
  CHECK(coverage_analysis(bad->snapshot()).percent == 0.0);

  auto none = Study::create(make_items(2, {"gold"}), {});
  complete_study(*none, [](const Assignment&, const std::string&) {
    Labels l;
    l.long_adequacy = Ternary::No;
    return l;
  });
  CHECK_FALSE(coverage_analysis(none->snapshot()).percent.has_value());
}

TEST_CASE("report subsets and partial studies") {
  auto study = Study::create(make_items(3, {"gold"}), {});
  auto a = study->assign_task("w");
  study->submit_stage1(a->assignment_id, YesNo::Yes, Ternary::Yes);
  study->submit_stage2(a->assignment_id, YesNo::Yes, Ternary::Yes);
  CHECK_THROWS_AS(aggregate_report(study->snapshot(), {}), DataError);
  auto partial = aggregate_report(study->snapshot(), {AggregationMode::per_response, std::nullopt, true});
  CHECK(partial.partial);
  CHECK(partial.variants[0].responses == 1);
  CHECK_FALSE(partial.kappa[0].has_value());

  complete_study(*study, all_yes);
  auto sub = aggregate_report(study->snapshot(), {AggregationMode::majority, std::set<std::string>{"ex1"}, false});
  CHECK(sub.variants[0].cells == 1);
  CHECK_THROWS_AS(aggregate_report(study->snapshot(), {AggregationMode::majority, std::set<std::string>{"nope"}, false}),
                  DataError);
  auto j = to_json(sub);
  CHECK(j["mode"] == "majority");
  CHECK(j["variants"][0]["adequacy"]["Yes"] == 100.0);
  const auto text = render_study_report(aggregate_report(study->snapshot(), {}), sub);
  CHECK(text.find("[per-response]") != std::string::npos);
  CHECK(text.find("[majority]") != std::string::npos);
}

TEST_CASE("paired t-test") {
  // d = [0.5, 0, 0.5, 0]: mean 1/4, sd = sqrt(1/12), t = sqrt(3) on 3 df.
  auto r = paired_t_test({1, 0.5, 1, 1}, {0.5, 0.5, 0.5, 1});
  REQUIRE(r);
  CHECK(r->t == doctest::Approx(std::sqrt(3.0)));
  CHECK(r->df == 3);
  CHECK(r->p == doctest::Approx(2 * (1 - t3_cdf(std::sqrt(3.0)))));
  CHECK(r->p == doctest::Approx(0.181690).epsilon(1e-5));
  CHECK_FALSE(paired_t_test({1, 2, 3}, {1, 2, 3}).has_value());
  CHECK_FALSE(paired_t_test({2, 3, 4}, {1, 2, 3}).has_value());
  CHECK_THROWS_AS(paired_t_test({1}, {1}), DataError);
  CHECK_THROWS_AS(paired_t_test({1, 2}, {1}), DataError);
}

TEST_CASE("t-test p values follow the closed-form distribution") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(4), b(4);
    for (auto& x : a) x = static_cast<double>(rng() % 3) / 2.0;
    for (auto& x : b) x = static_cast<double>(rng() % 3) / 2.0;
    auto r = paired_t_test(a, b);
    if (!r) continue;
    CHECK(r->p == doctest::Approx(2 * (1 - t3_cdf(std::abs(r->t)))).epsilon(1e-9));
  }
}

TEST_CASE("mcnemar exact test") {
  CHECK(mcnemar(10, 0) == doctest::Approx(2 * std::pow(0.5, 10)));
  CHECK(mcnemar(10, 0) == doctest::Approx(0.001953).epsilon(1e-3));
  CHECK(mcnemar(0, 10) == mcnemar(10, 0));
  CHECK(mcnemar(5, 5) == 1.0);
  CHECK(mcnemar(0, 0) == 1.0);
  // Two-sided tail by direct summation.
  double tail = 0;
  for (int k = 0; k <= 2; ++k) tail += std::tgamma(10.0) / (std::tgamma(k + 1.0) * std::tgamma(10.0 - k)) * std::pow(0.5, 9);
  CHECK(mcnemar(2, 7) == doctest::Approx(2 * tail));
}

TEST_CASE("variant comparison") {
  auto study = Study::create(make_items(6, {"a", "b"}), {});
  complete_study(*study, [](const Assignment& as, const std::string&) {
    Labels l;
    if (as.variant == "b") {
      l.adequacy = as.example_id == "ex0" ? Ternary::Yes : Ternary::No;
      l.faithfulness = YesNo::No;
    }
    return l;
  });
  auto cmp = compare_variants(study->snapshot(), "a", "b");
  CHECK(cmp.examples == 6);
  CHECK(cmp.functional_a_only == 6);
  CHECK(cmp.functional_b_only == 0);
  CHECK(cmp.mcnemar_p == doctest::Approx(mcnemar(6, 0)));
  REQUIRE(cmp.adequacy);
  CHECK(cmp.adequacy->t > 0);
}

TEST_CASE("a replayed log equals the live study") {
  TempDir dir;
  const auto path = dir / "study.jsonl";
  StudyConfig cfg;
  cfg.instructions = json{{"title", "Read carefully"}};
  auto study = Study::create(make_items(4, {"gold", "abs"}), cfg, path);
  complete_study(*study, [](const Assignment& a, const std::string& who) {
    Labels l;
    if (who == "w1") l.fluency = YesNo::No;
    if (a.variant == "abs") l.long_adequacy = Ternary::Partially;
    return l;
  });
  study->submit_selection("w0", "ex2", {0, 1});
  const auto live = study->snapshot();
  const auto replay = load_study_log(path);
  CHECK(replay.items == live.items);
  CHECK(replay.records.size() == live.records.size());
  CHECK(replay.selections.size() == 1);
  CHECK(replay.config.instructions == cfg.instructions);
  CHECK(to_json(aggregate_report(replay, {})) == to_json(aggregate_report(live, {})));
  CHECK(study->export_log() == slurp(path));

  std::istringstream from_export(study->export_log());
  CHECK(load_study_log(from_export).records.size() == live.records.size());
  CHECK_THROWS_AS(Study::create(make_items(1, {"gold"}), {}, path), ConfigError);
}

TEST_CASE("a torn final line is dropped on reopen") {
  TempDir dir;
  const auto path = dir / "study.jsonl";
  {
    auto study = Study::create(make_items(2, {"gold"}), {}, path);
    auto a = study->assign_task("w");
    study->submit_stage1(a->assignment_id, YesNo::Yes, Ternary::Yes);
  }
  const auto intact = slurp(path);
  spit(path, intact + R"({"type":"stage2","assignment_id":"a1","faith)");
  auto reopened = Study::open(path);
  CHECK(slurp(path) == intact);
  auto a = reopened->assign_task("w");
  CHECK(a->stage == 2);
  reopened->submit_stage2(a->assignment_id, YesNo::Yes, Ternary::Yes);
  CHECK(load_study_log(path).records.at(0).complete());

  spit(path, intact + "{bad json}\n");
  CHECK_THROWS_AS(Study::open(path), DataError);
}

TEST_CASE("expired leases free their cell") {
  FakeClock clock;
  StudyConfig cfg;
  cfg.annotators_per_cell = 1;
  cfg.lease_seconds = 10;
  auto study = Study::create(make_items(1, {"gold"}), cfg, {}, clock.fn());
  auto a = study->assign_task("slow");
  REQUIRE(a);
  CHECK_FALSE(study->assign_task("fast").has_value());
  clock.t->store(1000 + 11'000);
  auto b = study->assign_task("fast");
  REQUIRE(b);
  CHECK(b->example_id == a->example_id);
  CHECK_THROWS_AS(study->submit_stage1(a->assignment_id, YesNo::Yes, Ternary::Yes), ProtocolError);
  CHECK_FALSE(study->assign_task("slow").has_value());
  const auto snap = study->snapshot();
  CHECK(snap.records.at(0).released);
}

TEST_CASE("timestamps never run backwards") {
  FakeClock clock;
  auto study = Study::create(make_items(1, {"gold"}), {}, {}, clock.fn());
  clock.t->store(5000);
  auto a = study->assign_task("w");
  clock.t->store(10);
  study->submit_stage1(a->assignment_id, YesNo::Yes, Ternary::Yes);
  study->submit_stage2(a->assignment_id, YesNo::Yes, Ternary::Yes);
  const auto r = study->snapshot().records.at(0);
  CHECK(r.assigned_ms == 5000);
  CHECK(r.stage1->time_ms >= r.assigned_ms);
  CHECK(r.stage2->time_ms >= r.stage1->time_ms);
}

TEST_CASE("selection flow") {
  auto items = make_items(1, {"gold"});
  auto study = Study::create(items, {});
  auto [question, sentences] = study->selection_item("ex0");
  CHECK(question == "Question 0?");
  CHECK(sentences == std::vector<std::string>{"Long answer 0.", "It has two sentences."});
  study->submit_selection("w", "ex0", {1});
  CHECK(study->snapshot().selections.at(0).selected == std::set<std::size_t>{1});
  CHECK_THROWS_AS(study->submit_selection("w", "ex0", {2}), DataError);
  CHECK_THROWS_AS(study->submit_selection("w", "ex0", {}), DataError);
  CHECK_THROWS_AS(study->selection_item("zzz"), DataError);
}

TEST_CASE("study items round-trip through json") {
  auto items = make_items(2, {"gold", "abs"});
  items[1].answer_sentences = {"Long answer 1.", "It has two sentences."};
  std::string text;
  for (const auto& it : items) text += to_json(it).dump() + "\n";
  std::istringstream in(text);
  CHECK(read_study_items(in) == items);
  CHECK_THROWS_AS(study_item_from_json(json{{"example_id", "x"}}), DataError);
}

}  // TEST_SUITE
