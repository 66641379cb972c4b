#pragma once

// The update agent: slide understanding (layout alignment, data-source and
// logic extraction) and instruction-driven update (state update, SQL,
// recomputation, summary rewrite) over a pluggable model provider.

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dynaslide/datastore.hpp"
#include "dynaslide/json_io.hpp"
#include "dynaslide/model.hpp"
#include "dynaslide/render.hpp"
#include "dynaslide/state.hpp"
#include "dynaslide/stats.hpp"
#include "dynaslide/templates.hpp"

namespace dynaslide {

enum class Task {
  layout_parse,
  data_source_extract,
  logic_closed,
  logic_open,
  instruction_parse,
  sql_generate,
  summary_rewrite,
};
std::string_view to_string(Task t);
Task parse_task(std::string_view s);

// Response schema sent along with remote requests (documentation for the model).
Json response_schema(Task t);

class ModelProvider {
 public:
  virtual ~ModelProvider() = default;
  virtual std::string id() const = 0;
  virtual bool supports(Task t) const = 0;
  // Raw structured response; the pipeline validates it. ProviderError on failure.
  virtual Json call(Task t, const Json& input) = 0;
};

// Answers from ground-truth metadata. Layout predictions carry seeded uniform
// jitter of up to `jitter` of each box dimension.
class OracleProvider : public ModelProvider {
 public:
  OracleProvider(const TemplatePack& pack, SlideMetadata gold, double jitter = 0.05);
  std::string id() const override { return "oracle"; }
  bool supports(Task) const override { return true; }
  Json call(Task t, const Json& input) override;

 private:
  const TemplatePack& pack_;
  SlideMetadata gold_;
  double jitter_;
};

// Fixture file per request: <dir>/<sha256 of {"task","input"}>.json.
std::string request_digest(Task t, const Json& input);

class ReplayProvider : public ModelProvider {
 public:
  explicit ReplayProvider(std::string dir);
  std::string id() const override { return "replay"; }
  bool supports(Task) const override { return true; }
  Json call(Task t, const Json& input) override;

 private:
  std::string dir_;
};

// Forwards to another provider and writes each response as a replay fixture.
class RecordingProvider : public ModelProvider {
 public:
  RecordingProvider(ModelProvider& inner, std::string dir);
  std::string id() const override { return inner_.id(); }
  bool supports(Task t) const override { return inner_.supports(t); }
  Json call(Task t, const Json& input) override;

 private:
  ModelProvider& inner_;
  std::string dir_;
  std::mutex mu_;
};

struct RemoteConfig {
  std::string base_url;  // DYNASLIDE_MODEL_URL, e.g. http://host:8080/v1/tasks
  std::string api_key;   // DYNASLIDE_MODEL_KEY
  int timeout_seconds = 60;
};

RemoteConfig remote_config_from_env();

// POST {task, input, schema}; the reply (a JSON object, or text holding a
// fenced ```json block) is parsed with one retry on failure.
class RemoteProvider : public ModelProvider {
 public:
  explicit RemoteProvider(RemoteConfig cfg);
  std::string id() const override { return "remote"; }
  bool supports(Task) const override { return true; }
  Json call(Task t, const Json& input) override;

 private:
  RemoteConfig cfg_;
};

// First ```json fenced block of a reply, or the whole text. ParseError.
Json extract_fenced_json(std::string_view text);

// ---------------------------------------------------------------------------
// Layout

struct LayoutPrediction {
  Role label = Role::unlabeled;
  Rect bbox;
  double confidence = 1.0;
};

double iou(const Rect& a, const Rect& b);  // DegenerateRect for zero area

// Shapes whose best unconsumed prediction exceeds the threshold take its
// label, others become unlabeled. Greedy by descending IoU, one prediction
// per shape; ties go to the earlier shape, then the earlier prediction.
SlideDocument match_elements(const std::vector<LayoutPrediction>& predictions, const SlideDocument& shapes,
                             double threshold = 0.5);

std::vector<LayoutPrediction> predictions_from_json(const Json& j);  // SchemaViolation
Json to_json(const std::vector<LayoutPrediction>& p);

// ---------------------------------------------------------------------------
// Stages

struct DataSource {
  std::string table_name;
  Slots slots;
  bool operator==(const DataSource&) const = default;
};

Json slide_context(const SlideDocument& s, const Store& store);

DataSource extract_data_source(const Json& slide_ctx, ModelProvider& provider);
ClosedCall extract_logic_closed(const Json& table_ctx, ModelProvider& provider);
OpenLogic extract_logic_open(const Json& table_ctx, ModelProvider& provider);

// Strict: the response must be a complete ParameterState; anything else
// raises SchemaViolation and leaves `current` untouched.
ParameterState parse_instruction(const std::string& instruction, const ParameterState& current,
                                 ModelProvider& provider);
// Validation applied to every state the pipeline accepts. SchemaViolation.
ParameterState validate_state_json(const Json& j);

struct Recomputed {
  AnalyticalTable raw;
  std::vector<TransactionRecord> rows;
};

Recomputed recompute(const ParameterState& state, const CompiledSql& sql, const Store& store);
Recomputed recompute(const ParameterState& state, const Store& store);

std::string rewrite_summary(const std::string& old_summary, const AnalyticalTable& old_table,
                            const AnalyticalTable& new_table, const SummaryMetrics& metrics,
                            const ParameterState& new_state, ModelProvider& provider);

// Boundary-aware simultaneous replacement of old rendered values by new ones
// (longest first). Numbers never match inside longer numbers, words never
// inside longer words.
std::string substitute_values(std::string_view text, const std::map<std::string, std::string>& old_values,
                              const std::map<std::string, std::string>& new_values);

// ---------------------------------------------------------------------------
// Pipeline

struct StageTrace {
  std::string stage;  // layout, data_source, logic, instruction, sql, recompute, summary
  std::string input_digest;
  std::string output_digest;
  std::string provider;
  bool ok = false;
  std::string error;
  Json output;  // the stage result, compared against gold intermediates
};

inline constexpr std::array<std::string_view, 7> kStages = {"layout", "data_source", "logic", "instruction",
                                                            "sql",    "recompute",   "summary"};

Json to_json(const StageTrace& t);
StageTrace trace_from_json(const Json& j);
std::string traces_to_jsonl(const std::string& case_id, const std::vector<StageTrace>& traces);

struct PipelineOptions {
  LogicMode mode = LogicMode::closed;
  bool provider_sql = false;  // ask the provider for SQL instead of compiling it
  double iou_threshold = 0.5;
};

struct PipelineResult {
  std::optional<SlideDocument> slide;
  std::vector<StageTrace> traces;  // always 7
};

PipelineResult run_pipeline(const SlideDocument& source, const std::string& instruction, const Store& store,
                            ModelProvider& provider, const PipelineOptions& options = {});

}  // namespace dynaslide
