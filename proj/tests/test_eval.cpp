#include <gtest/gtest.h>

#include "dynaslide/bench.hpp"
#include "dynaslide/eval.hpp"
#include "support.hpp"

using namespace dynaslide;

namespace {

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorKind::IoError;
}

const Dataset& dataset() {
  static const Dataset d = [] {
    BenchConfig cfg;
    cfg.count = 12;
    cfg.seed = 5;
    return build_dataset(cfg, default_pack(), testsupport::corpus_store());
  }();
  return d;
}

SlideElement& role_element(SlideDocument& s, Role r) {
  for (auto& e : s.elements) {
    if (e.role == r) return e;
  }
  throw std::runtime_error("role missing");
}

EvalCase oracle_case(const Triple& t, LogicMode mode) {
  OracleProvider oracle(default_pack(), t.metadata);
  PipelineOptions o;
  o.mode = mode;
  auto r = run_pipeline(t.source, t.instruction, testsupport::corpus_store(), oracle, o);
  EvalCase c;
  c.id = t.id;
  c.theme_id = t.theme_id;
  c.function_id = t.function_id;
  c.scenario = t.scenario;
  c.mode = mode;
  c.gold = t.target;
  c.gold_meta = t.metadata;
  c.pred = r.slide;
  c.traces = r.traces;
  return c;
}

}  // namespace

TEST(Text, WhitespaceNormalization) {
  EXPECT_EQ(normalize_whitespace("  a \n\t b  "), "a b");
  EXPECT_EQ(normalize_whitespace(""), "");
}

TEST(ExactMatch, ContentAndLayout) {
  const SlideDocument gold = dataset().triples.front().target;
  SlideDocument pred = gold;
  EXPECT_TRUE(slide_exact_match(pred, gold));
  role_element(pred, Role::summary).text = "  " + role_element(pred, Role::summary).text + "\n";
  EXPECT_TRUE(slide_exact_match(pred, gold));
  pred = gold;
  role_element(pred, Role::title).layout.x += 1;
  EXPECT_FALSE(slide_exact_match(pred, gold));
  pred = gold;
  role_element(pred, Role::title).text += "!";
  EXPECT_FALSE(slide_exact_match(pred, gold));
  pred = gold;
  pred.elements.pop_back();
  EXPECT_FALSE(slide_exact_match(pred, gold));
}

TEST(ExactMatch, CellsCompareAtDisplayPrecision) {
  SlideDocument gold = dataset().triples.front().target;
  for (auto& e : gold.elements) {
    if (auto* t = std::get_if<AnalyticalTable>(&e.payload)) {
      t->cells.assign(t->rows(), std::vector<Cell>(t->cols(), 62.1));
    }
    if (auto* c = std::get_if<ChartSpec>(&e.payload)) {
      for (auto& s : c->series) s.values.assign(s.values.size(), 62.1);
    }
  }
  SlideDocument pred = gold;
  for (auto& e : pred.elements) {
    if (auto* t = std::get_if<AnalyticalTable>(&e.payload)) {
      t->cells.assign(t->rows(), std::vector<Cell>(t->cols(), 62.12));
    }
    if (auto* c = std::get_if<ChartSpec>(&e.payload)) {
      for (auto& s : c->series) s.values.assign(s.values.size(), 62.14);
    }
  }
  EXPECT_TRUE(slide_exact_match(pred, gold));
  for (auto& e : pred.elements) {
    if (auto* t = std::get_if<AnalyticalTable>(&e.payload)) t->cells[0][0] = 63.2;
    if (auto* c = std::get_if<ChartSpec>(&e.payload)) c->series[0].values[0] = 63.2;
  }
  EXPECT_FALSE(slide_exact_match(pred, gold));
}

TEST(ElementAccuracy, HandTally) {
  const auto& tr = dataset().triples;
  std::vector<SlideDocument> golds = {tr[0].target, tr[1].target, tr[2].target};
  std::vector<std::optional<SlideDocument>> preds = {golds[0], golds[1], std::nullopt};
  role_element(*preds[1], Role::title).text = "wrong";
  const auto acc = element_accuracy(preds, golds);
  EXPECT_DOUBLE_EQ(acc.at("Title"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(acc.at("Summary"), 2.0 / 3.0);
  // Groups missing from a gold slide count as matched.
  auto has = [](const SlideDocument& s, Role r) { return s.find_role(r) != nullptr; };
  double table_hits = 0;
  for (std::size_t i = 0; i < 3; ++i) table_hits += (i < 2 || !has(golds[i], Role::table_body)) ? 1 : 0;
  EXPECT_DOUBLE_EQ(acc.at("Table"), table_hits / 3.0);
  EXPECT_EQ(kind_of([&] { element_accuracy(preds, {golds[0]}); }), ErrorKind::LengthMismatch);
  EXPECT_EQ(element_accuracy({}, {}).at("Chart"), 0.0);
}

TEST(Modules, OracleTracesScorePerfectly) {
  for (LogicMode mode : {LogicMode::closed, LogicMode::open}) {
    for (const auto& t : dataset().triples) {
      const EvalCase c = oracle_case(t, mode);
      const CaseScore s = score_case(c, testsupport::corpus_store());
      EXPECT_TRUE(s.exact) << t.id;
      for (const auto& [m, ok] : s.modules) EXPECT_TRUE(ok) << t.id << " " << m;
      for (const auto& [g, ok] : s.elements) EXPECT_TRUE(ok) << t.id << " " << g;
      EXPECT_EQ(s.summary_facts, true);
    }
  }
}

TEST(Modules, TamperedTracesAreCaught) {
  const Triple& t = dataset().triples.front();
  EvalCase c = oracle_case(t, LogicMode::closed);
  const Store& store = testsupport::corpus_store();
  EvalCase tampered = c;
  tampered.traces[3].output["table_name"] = "resale_nowhere";
  auto s = score_case(tampered, store);
  EXPECT_FALSE(s.modules.at("Instr. Parse"));
  EXPECT_TRUE(s.modules.at("Func. Logic"));
  tampered = c;
  tampered.traces[4].output = {{"sql", "SELECT city FROM " + *t.metadata.slide_filters.table_name}, {"params", Json::array()}};
  EXPECT_FALSE(score_case(tampered, store).modules.at("SQL Gen."));
  tampered = c;
  tampered.traces.pop_back();
  EXPECT_EQ(kind_of([&] { score_case(tampered, store); }), ErrorKind::IncompleteTrace);
  tampered = c;
  std::swap(tampered.traces[1], tampered.traces[2]);
  EXPECT_EQ(kind_of([&] { score_case(tampered, store); }), ErrorKind::IncompleteTrace);
}

TEST(Modules, EquivalentSqlScoresAsCorrect) {
  const Triple& t = dataset().triples.front();
  EvalCase c = oracle_case(t, LogicMode::closed);
  // Same result set, different text: inline literals instead of parameters.
  const QuerySpec q = parse_sql(c.traces[4].output.at("sql").get<std::string>(), [&] {
    std::vector<SqlValue> p;
    for (const auto& v : c.traces[4].output.at("params")) {
      if (v.is_string()) p.emplace_back(v.get<std::string>());
      else p.emplace_back(v.get<double>());
    }
    return p;
  }());
  std::string text = "SELECT ";
  for (std::size_t i = 0; i < q.projection.size(); ++i) text += (i ? ", " : "") + q.projection[q.projection.size() - 1 - i];
  text += " FROM " + q.table_name;
  for (std::size_t i = 0; i < q.predicates.size(); ++i) {
    const auto& p = q.predicates[i];
    auto lit = [](const SqlValue& v) {
      return std::holds_alternative<std::string>(v) ? "'" + std::get<std::string>(v) + "'" : format_number(std::get<double>(v));
    };
    text += (i ? " AND " : " WHERE ") + p.field +
            (p.op == PredicateOp::eq ? " = " + lit(p.lo) : " BETWEEN " + lit(p.lo) + " AND " + lit(p.hi));
  }
  c.traces[4].output = {{"sql", text}, {"params", Json::array()}};
  EXPECT_TRUE(score_case(c, testsupport::corpus_store()).modules.at("SQL Gen."));
}

TEST(Report, DeterministicAndFormatted) {
  std::vector<CaseScore> scores;
  for (const auto& t : dataset().triples) scores.push_back(score_case(oracle_case(t, LogicMode::closed), testsupport::corpus_store()));
  scores[0].exact = false;
  scores[1].exact = false;
  scores[2].exact = false;
  const Report a = report(scores);
  std::reverse(scores.begin(), scores.end());
  const Report b = report(scores);
  EXPECT_EQ(canonical_dump(a.json), canonical_dump(b.json));
  EXPECT_EQ(a.text, b.text);
  const double want = 100.0 * static_cast<double>(scores.size() - 3) / static_cast<double>(scores.size());
  EXPECT_DOUBLE_EQ(a.json.at("task_success").at("overall").at("closed").at("success_rate").get<double>(), want);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", want);
  EXPECT_NE(a.text.find(buf), std::string::npos);
}
