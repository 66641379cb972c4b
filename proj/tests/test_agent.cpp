#include <gtest/gtest.h>

#include <httplib.h>

#include <filesystem>
#include <functional>
#include <thread>

#include "dynaslide/agent.hpp"
#include "dynaslide/bench.hpp"
#include "support.hpp"

using namespace dynaslide;
namespace fs = std::filesystem;

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

class FnProvider : public ModelProvider {
 public:
  explicit FnProvider(std::function<Json(Task, const Json&)> fn) : fn_(std::move(fn)) {}
  std::string id() const override { return "stub"; }
  bool supports(Task) const override { return true; }
  Json call(Task t, const Json& in) override { return fn_(t, in); }

 private:
  std::function<Json(Task, const Json&)> fn_;
};

const Dataset& small_dataset() {
  static const Dataset d = [] {
    BenchConfig cfg;
    cfg.count = 12;
    cfg.seed = 3;
    return build_dataset(cfg, default_pack(), testsupport::corpus_store());
  }();
  return d;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dynaslide_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SlideDocument two_box_slide() {
  SlideDocument s;
  s.elements.push_back({"title-1", ElementType::textBox, Role::unlabeled, "", {0, 0, 100, 100}, {}});
  s.elements.push_back({"summary-1", ElementType::textBox, Role::unlabeled, "", {200, 0, 100, 100}, {}});
  return s;
}

}  // namespace

TEST(Iou, KnownValues) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {1, 1, 2, 2}), 1.0 / 7.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 4, 2}, {0, 0, 2, 2}), 0.5);
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {5, 5, 2, 2}), 0.0);
  EXPECT_DOUBLE_EQ(iou({3, 4, 10, 10}, {3, 4, 10, 10}), 1.0);
  EXPECT_EQ(kind_of([] { iou({0, 0, 0, 5}, {0, 0, 1, 1}); }), ErrorKind::DegenerateRect);
}

TEST(Iou, SymmetricAndBoundedProperty) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 2000; ++i) {
    auto r = [&] {
      return Rect{static_cast<int>(rng() % 50), static_cast<int>(rng() % 50), 1 + static_cast<int>(rng() % 40),
                  1 + static_cast<int>(rng() % 40)};
    };
    const Rect a = r(), b = r();
    const double v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    // Brute-force pixel count oracle.
    long inter = 0;
    for (int x = 0; x < 100; ++x) {
      for (int y = 0; y < 100; ++y) {
        const bool in_a = x >= a.x && x < a.x + a.width && y >= a.y && y < a.y + a.height;
        const bool in_b = x >= b.x && x < b.x + b.width && y >= b.y && y < b.y + b.height;
        inter += in_a && in_b;
      }
    }
    const double uni = static_cast<double>(a.width * a.height + b.width * b.height - inter);
    EXPECT_NEAR(v, static_cast<double>(inter) / uni, 1e-12);
  }
}

TEST(Matching, ThresholdIsStrict) {
  const SlideDocument shapes = two_box_slide();
  // 0.5 exactly: prediction twice the shape's width.
  auto out = match_elements({{Role::title, {0, 0, 200, 100}, 0.9}}, shapes);
  EXPECT_EQ(out.elements[0].role, Role::unlabeled);
  out = match_elements({{Role::title, {0, 0, 199, 100}, 0.9}}, shapes);
  EXPECT_EQ(out.elements[0].role, Role::title);
  EXPECT_EQ(out.elements[1].role, Role::unlabeled);
}

TEST(Matching, OnePredictionPerShape) {
  SlideDocument shapes = two_box_slide();
  shapes.elements[1].layout = {10, 0, 100, 100};
  // Both shapes overlap the single prediction; only the better one takes it.
  const auto out = match_elements({{Role::caption, {10, 0, 100, 100}, 1.0}}, shapes);
  EXPECT_EQ(out.elements[0].role, Role::unlabeled);
  EXPECT_EQ(out.elements[1].role, Role::caption);
}

TEST(Matching, PredictionJsonIsStrict) {
  const std::vector<LayoutPrediction> p = {{Role::summary, {10, 20, 30, 40}, 0.75}};
  const auto back = predictions_from_json(to_json(p));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].bbox, p[0].bbox);
  EXPECT_EQ(back[0].label, Role::summary);
  Json bad = to_json(p);
  bad["predictions"][0]["bbox"]["x"] = 1275;
  EXPECT_EQ(kind_of([&] { predictions_from_json(bad); }), ErrorKind::SchemaViolation);
  EXPECT_EQ(kind_of([] { predictions_from_json(Json::array()); }), ErrorKind::SchemaViolation);
}

TEST(Substitution, BoundariesAndSimultaneity) {
  const std::map<std::string, std::string> old_v = {{"start_year", "2021"}, {"end_year", "2022"},
                                                    {"block", "Chaoyang"}, {"price_bin_step", "1.5"}};
  const std::map<std::string, std::string> new_v = {{"start_year", "2022"}, {"end_year", "2023"},
                                                    {"block", "Haidian"}, {"price_bin_step", "2"}};
  EXPECT_EQ(substitute_values("Chaoyang, 2021 to 2022", old_v, new_v), "Haidian, 2022 to 2023");
  EXPECT_EQ(substitute_values("2021-2022 in 1.5M bands", old_v, new_v), "2022-2023 in 2M bands");
  EXPECT_EQ(substitute_values("20210 11.5 1.55 Chaoyangmen", old_v, new_v), "20210 11.5 1.55 Chaoyangmen");
  EXPECT_EQ(substitute_values("2021.5", old_v, new_v), "2021.5");
}

TEST(Substitution, AmbiguousOldValuesAreLeftAlone) {
  const std::map<std::string, std::string> old_v = {{"start_year", "2022"}, {"end_year", "2022"}};
  const std::map<std::string, std::string> new_v = {{"start_year", "2021"}, {"end_year", "2023"}};
  EXPECT_EQ(substitute_values("in 2022", old_v, new_v), "in 2022");
}

TEST(Fenced, ExtractsJson) {
  EXPECT_EQ(extract_fenced_json("Sure:\n```json\n{\"a\": 1}\n```\nDone."), (Json{{"a", 1}}));
  EXPECT_EQ(extract_fenced_json("{\"b\": [1, 2]}"), (Json{{"b", {1, 2}}}));
  EXPECT_EQ(kind_of([] { extract_fenced_json("```json\n{\"a\": 1}"); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { extract_fenced_json("no json here"); }), ErrorKind::ParseError);
}

TEST(Instruction, StrictResponses) {
  const Triple& t = small_dataset().triples.front();
  const ParameterState current = state_from_filters(t.metadata.slide_filters, LogicMode::closed);
  FnProvider echo([&](Task, const Json& in) { return in.at("state"); });
  EXPECT_EQ(parse_instruction("noop", current, echo), current);
  FnProvider extra([&](Task, const Json& in) {
    Json j = in.at("state");
    j["note"] = "hi";
    return j;
  });
  EXPECT_EQ(kind_of([&] { parse_instruction("x", current, extra); }), ErrorKind::SchemaViolation);
  FnProvider bad_param([&](Task, const Json& in) {
    Json j = in.at("state");
    j["logic"] = {{"function_id", "F3"}, {"params", {{"area_bin_step", 13}}}};
    return j;
  });
  EXPECT_EQ(kind_of([&] { parse_instruction("x", current, bad_param); }), ErrorKind::SchemaViolation);
}

TEST(Pipeline, OracleReproducesTargets) {
  const auto& d = small_dataset();
  const Store& store = testsupport::corpus_store();
  for (LogicMode mode : {LogicMode::closed, LogicMode::open}) {
    for (const auto& t : d.triples) {
      OracleProvider oracle(default_pack(), t.metadata);
      PipelineOptions o;
      o.mode = mode;
      const auto r = run_pipeline(t.source, t.instruction, store, oracle, o);
      ASSERT_EQ(r.traces.size(), kStages.size());
      for (std::size_t i = 0; i < kStages.size(); ++i) {
        EXPECT_EQ(r.traces[i].stage, kStages[i]);
        EXPECT_TRUE(r.traces[i].ok) << t.id << " " << r.traces[i].stage << " " << r.traces[i].error;
      }
      ASSERT_TRUE(r.slide);
      EXPECT_EQ(*r.slide, t.target) << t.id << " " << to_string(mode);
    }
  }
}

TEST(Pipeline, ProviderSqlPathMatchesCompiledPath) {
  const auto& t = small_dataset().triples[1];
  OracleProvider oracle(default_pack(), t.metadata);
  PipelineOptions o;
  o.provider_sql = true;
  const auto r = run_pipeline(t.source, t.instruction, testsupport::corpus_store(), oracle, o);
  ASSERT_TRUE(r.slide);
  EXPECT_EQ(*r.slide, t.target);
}

TEST(Pipeline, FailureSkipsLaterStages) {
  const auto& t = small_dataset().triples.front();
  OracleProvider oracle(default_pack(), t.metadata);
  FnProvider failing([&](Task task, const Json& in) -> Json {
    if (task == Task::sql_generate) throw Error(ErrorKind::ProviderError, "model unavailable");
    return oracle.call(task, in);
  });
  PipelineOptions o;
  o.provider_sql = true;
  const auto r = run_pipeline(t.source, t.instruction, testsupport::corpus_store(), failing, o);
  EXPECT_FALSE(r.slide);
  ASSERT_EQ(r.traces.size(), 7u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(r.traces[i].ok) << r.traces[i].stage;
  for (std::size_t i = 4; i < 7; ++i) {
    EXPECT_FALSE(r.traces[i].ok);
    EXPECT_FALSE(r.traces[i].error.empty());
  }
  EXPECT_NE(r.traces[4].error.find("model unavailable"), std::string::npos);
}

TEST(Pipeline, TracesSerialize) {
  const auto& t = small_dataset().triples.front();
  OracleProvider oracle(default_pack(), t.metadata);
  const auto r = run_pipeline(t.source, t.instruction, testsupport::corpus_store(), oracle);
  for (const auto& tr : r.traces) {
    const StageTrace back = trace_from_json(to_json(tr));
    EXPECT_EQ(back.stage, tr.stage);
    EXPECT_EQ(back.output, tr.output);
    EXPECT_EQ(back.output_digest, tr.output_digest);
  }
  const std::string jsonl = traces_to_jsonl("t1", r.traces);
  EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 7);
}

TEST(Providers, RecordThenReplay) {
  const auto& d = small_dataset();
  const fs::path dir = fresh_dir("fixtures");
  const Store& store = testsupport::corpus_store();
  std::vector<PipelineResult> first;
  for (const auto& t : d.triples) {
    OracleProvider oracle(default_pack(), t.metadata);
    RecordingProvider rec(oracle, dir.string());
    first.push_back(run_pipeline(t.source, t.instruction, store, rec));
  }
  ReplayProvider replay(dir.string());
  for (std::size_t i = 0; i < d.triples.size(); ++i) {
    const auto r = run_pipeline(d.triples[i].source, d.triples[i].instruction, store, replay);
    ASSERT_TRUE(r.slide);
    EXPECT_EQ(*r.slide, *first[i].slide);
    for (std::size_t s = 0; s < r.traces.size(); ++s) {
      EXPECT_EQ(r.traces[s].output_digest, first[i].traces[s].output_digest);
    }
  }
  EXPECT_EQ(kind_of([&] { ReplayProvider(fresh_dir("empty").string()).call(Task::layout_parse, Json::object()); }),
            ErrorKind::ProviderError);
  fs::remove_all(dir);
}

TEST(Providers, RemoteSpeaksHttpAndParsesFencedReplies) {
  httplib::Server server;
  std::string seen_auth;
  Json seen_body;
  server.Post("/v1/tasks", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = Json::parse(req.body);
    const Json reply = {{"choices", {{{"message", {{"content", "```json\n{\"text\": \"ok\"}\n```"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  RemoteProvider p({"http://127.0.0.1:" + std::to_string(port) + "/v1/tasks", "secret", 5});
  EXPECT_EQ(p.call(Task::summary_rewrite, {{"old_summary", "x"}}), (Json{{"text", "ok"}}));
  EXPECT_EQ(seen_auth, "Bearer secret");
  EXPECT_EQ(seen_body.at("task"), "summary_rewrite");
  EXPECT_TRUE(seen_body.contains("schema"));
  server.stop();
  th.join();
  EXPECT_EQ(kind_of([&] { p.call(Task::summary_rewrite, Json::object()); }), ErrorKind::ProviderError);
  EXPECT_EQ(kind_of([] { RemoteProvider({"", "", 1}); }), ErrorKind::InvalidConfig);
}
