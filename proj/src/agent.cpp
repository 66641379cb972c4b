#include "dynaslide/agent.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "dynaslide/digest.hpp"

namespace dynaslide {

namespace {

constexpr std::array<std::pair<Task, std::string_view>, 7> kTaskNames = {{
    {Task::layout_parse, "layout_parse"},
    {Task::data_source_extract, "data_source_extract"},
    {Task::logic_closed, "logic_closed"},
    {Task::logic_open, "logic_open"},
    {Task::instruction_parse, "instruction_parse"},
    {Task::sql_generate, "sql_generate"},
    {Task::summary_rewrite, "summary_rewrite"},
}};

}  // namespace

std::string_view to_string(Task t) {
  for (const auto& [task, name] : kTaskNames) {
    if (task == t) return name;
  }
  return "unknown";
}

Task parse_task(std::string_view s) {
  for (const auto& [task, name] : kTaskNames) {
    if (name == s) return task;
  }
  throw Error(ErrorKind::SchemaViolation, "unknown task '" + std::string(s) + "'");
}

Json response_schema(Task t) {
  switch (t) {
    case Task::layout_parse:
      return {{"predictions", "array of {label: role, bbox: [x,y,w,h], confidence: number}"}};
    case Task::data_source_extract:
      return {{"table_name", "string"}, {"slots", "object with all 9 schema fields, null when unconstrained"}};
    case Task::logic_closed:
      return {{"kind", "closed"}, {"function_id", "F1..F11"}, {"params", "object name -> candidate value"}};
    case Task::logic_open:
      return {{"kind", "open"}, {"S", "FC|CF|XC"}, {"H", {{"row", "array"}, {"col", "array"}}},
              {"C", "array of [field, T, start, end, step]"}, {"F", "array"}, {"O", "array of SUM|AVG|COUNT"}};
    case Task::instruction_parse:
      return {{"table_name", "string"}, {"slots", "object"}, {"logic", "closed or open logic"}};
    case Task::sql_generate:
      return {{"sql", "string"}, {"params", "array"}};
    case Task::summary_rewrite:
      return {{"text", "string"}};
  }
  return Json::object();
}

// ---------------------------------------------------------------------------
// Layout

double iou(const Rect& a, const Rect& b) {
  if (a.width <= 0 || a.height <= 0 || b.width <= 0 || b.height <= 0) {
    throw Error(ErrorKind::DegenerateRect, "rectangle with zero area");
  }
  const long long ix = std::max(0, std::min(a.x + a.width, b.x + b.width) - std::max(a.x, b.x));
  const long long iy = std::max(0, std::min(a.y + a.height, b.y + b.height) - std::max(a.y, b.y));
  const long long inter = ix * iy;
  const long long uni = static_cast<long long>(a.width) * a.height + static_cast<long long>(b.width) * b.height - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

SlideDocument match_elements(const std::vector<LayoutPrediction>& predictions, const SlideDocument& shapes,
                             double threshold) {
  struct Pair {
    double v;
    std::size_t shape;
    std::size_t pred;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < shapes.elements.size(); ++i) {
    const Rect& r = shapes.elements[i].layout;
    if (r.width <= 0 || r.height <= 0) continue;
    for (std::size_t j = 0; j < predictions.size(); ++j) {
      const Rect& p = predictions[j].bbox;
      if (p.width <= 0 || p.height <= 0) continue;
      const double v = iou(r, p);
      if (v > threshold) pairs.push_back({v, i, j});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.v != b.v) return a.v > b.v;
    if (a.shape != b.shape) return a.shape < b.shape;
    return a.pred < b.pred;
  });
  SlideDocument out = shapes;
  for (auto& e : out.elements) e.role = Role::unlabeled;
  std::vector<char> shape_done(shapes.elements.size(), 0), pred_used(predictions.size(), 0);
  for (const auto& p : pairs) {
    if (shape_done[p.shape] || pred_used[p.pred]) continue;
    shape_done[p.shape] = pred_used[p.pred] = 1;
    out.elements[p.shape].role = predictions[p.pred].label;
  }
  return out;
}

Json to_json(const std::vector<LayoutPrediction>& p) {
  Json arr = Json::array();
  for (const auto& x : p) {
    arr.push_back({{"label", to_string(x.label)}, {"bbox", to_json(x.bbox)}, {"confidence", x.confidence}});
  }
  return {{"predictions", arr}};
}

std::vector<LayoutPrediction> predictions_from_json(const Json& j) {
  try {
    if (!j.is_object() || j.size() != 1 || !j.contains("predictions") || !j["predictions"].is_array()) {
      throw Error(ErrorKind::SchemaViolation, "layout response must be {\"predictions\": [...]}");
    }
    std::vector<LayoutPrediction> out;
    for (const auto& p : j["predictions"]) {
      if (!p.is_object() || p.size() != 3 || !p.contains("label") || !p.contains("bbox") ||
          !p.contains("confidence") || !p["label"].is_string() || !p["confidence"].is_number()) {
        throw Error(ErrorKind::SchemaViolation, "prediction needs label, bbox, confidence");
      }
      LayoutPrediction lp;
      lp.label = parse_role(p["label"].get<std::string>());
      lp.bbox = rect_from_json(p["bbox"]);
      lp.confidence = p["confidence"].get<double>();
      if (lp.confidence < 0.0 || lp.confidence > 1.0) throw Error(ErrorKind::SchemaViolation, "confidence");
      if (lp.bbox.x < 0 || lp.bbox.y < 0 || lp.bbox.x + lp.bbox.width > kCanvasWidth ||
          lp.bbox.y + lp.bbox.height > kCanvasHeight) {
        throw Error(ErrorKind::SchemaViolation, "bbox outside the canvas");
      }
      out.push_back(lp);
    }
    return out;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SchemaViolation) throw;
    throw Error(ErrorKind::SchemaViolation, e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::SchemaViolation, e.what());
  }
}

// ---------------------------------------------------------------------------
// Understanding

namespace {

const SlideElement* first_with_payload(const SlideDocument& s, Role role) {
  for (const auto& e : s.elements) {
    if (e.role == role && !std::holds_alternative<std::monostate>(e.payload)) return &e;
  }
  return nullptr;
}

template <typename Fn>
auto as_schema_error(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SchemaViolation || e.kind() == ErrorKind::ProviderError) throw;
    throw Error(ErrorKind::SchemaViolation, e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::SchemaViolation, e.what());
  }
}

Json function_tools() {
  Json tools = Json::array();
  for (const auto& f : function_registry()) {
    Json params = Json::object();
    for (const auto& p : f.params) params[p] = parameter_candidates().at(p);
    tools.push_back({{"function_id", f.id},
                     {"name", f.name},
                     {"structure", to_string(f.structure)},
                     {"params", params}});
  }
  return tools;
}

Json table_context(const SlideDocument& s) {
  Json ctx = Json::object();
  const auto* t = first_with_payload(s, Role::table_body);
  const auto* c = first_with_payload(s, Role::chart_body);
  ctx["table"] = t ? to_json(std::get<AnalyticalTable>(t->payload)) : Json(nullptr);
  ctx["chart"] = c ? to_json(std::get<ChartSpec>(c->payload)) : Json(nullptr);
  ctx["functions"] = function_tools();
  return ctx;
}

}  // namespace

Json slide_context(const SlideDocument& s, const Store& store) {
  Json ctx = Json::object();
  Json captions = Json::array(), titles = Json::array(), series = Json::array();
  for (const auto& e : s.elements) {
    if (e.role == Role::title) titles.push_back(e.text);
    if (e.role == Role::caption) captions.push_back(e.text);
  }
  ctx["titles"] = titles;
  ctx["captions"] = captions;
  if (const auto* t = first_with_payload(s, Role::table_body)) {
    const auto& table = std::get<AnalyticalTable>(t->payload);
    ctx["table_headers"] = {{"index", table.index_header}, {"rows", table.row_headers}, {"cols", table.col_headers}};
  } else {
    ctx["table_headers"] = nullptr;
  }
  if (const auto* c = first_with_payload(s, Role::chart_body)) {
    for (const auto& ser : std::get<ChartSpec>(c->payload).series) series.push_back(ser.name);
  }
  ctx["series"] = series;
  ctx["tables"] = store.table_names();
  ctx["fields"] = Json::array();
  for (auto f : kSchemaFields) ctx["fields"].push_back(std::string(f));
  return ctx;
}

DataSource extract_data_source(const Json& slide_ctx, ModelProvider& provider) {
  const Json r = provider.call(Task::data_source_extract, slide_ctx);
  return as_schema_error([&] {
    if (!r.is_object() || r.size() != 2 || !r.contains("table_name") || !r.contains("slots") ||
        !r["table_name"].is_string()) {
      throw Error(ErrorKind::SchemaViolation, "data source response must be {table_name, slots}");
    }
    DataSource d{r["table_name"].get<std::string>(), slots_from_json(r["slots"])};
    split_table_name(d.table_name);
    return d;
  });
}

ClosedCall extract_logic_closed(const Json& table_ctx, ModelProvider& provider) {
  const Json r = provider.call(Task::logic_closed, table_ctx);
  Logic l = as_schema_error([&] { return logic_from_json(r); });
  auto* call = std::get_if<ClosedCall>(&l);
  if (!call) throw Error(ErrorKind::SchemaViolation, "closed-domain extraction returned an open tuple");
  validate_params(function_info(call->function_id), call->params);
  return *call;
}

OpenLogic extract_logic_open(const Json& table_ctx, ModelProvider& provider) {
  const Json r = provider.call(Task::logic_open, table_ctx);
  return as_schema_error([&] { return open_logic_from_json(r); });
}

ParameterState validate_state_json(const Json& j) {
  return as_schema_error([&] {
    ParameterState s = parameter_state_from_json(j);
    if (s.table_name.empty()) throw Error(ErrorKind::SchemaViolation, "empty table_name");
    split_table_name(s.table_name);
    for (const auto* v : {&s.slots.city, &s.slots.block, &s.slots.project}) {
      if (*v && (*v)->empty()) throw Error(ErrorKind::SchemaViolation, "empty scope slot");
    }
    if (const auto* call = std::get_if<ClosedCall>(&s.logic)) {
      validate_params(function_info(call->function_id), call->params);
    } else {
      for (const auto& c : std::get<OpenLogic>(s.logic).constraints) {
        const auto* name = std::get_if<std::string>(&c.step);
        if (name && !parameter_candidates().count(*name)) {
          throw Error(ErrorKind::SchemaViolation, "unknown step parameter " + *name);
        }
      }
    }
    return s;
  });
}

ParameterState parse_instruction(const std::string& instruction, const ParameterState& current,
                                 ModelProvider& provider) {
  const Json input = {{"instruction", instruction}, {"state", to_json(current)}};
  const Json r = provider.call(Task::instruction_parse, input);
  return validate_state_json(r);
}

// ---------------------------------------------------------------------------
// Update

Recomputed recompute(const ParameterState& state, const CompiledSql& sql, const Store& store) {
  const QuerySpec spec = parse_sql(sql.text, sql.params);
  Recomputed out;
  out.rows = store.execute(spec).rows;
  if (const auto* call = std::get_if<ClosedCall>(&state.logic)) {
    if (!state.slots.date_code) throw Error(ErrorKind::MissingKey, "date_code slot");
    out.raw = run_statistical_function(call->function_id, out.rows, {call->params, *state.slots.date_code});
  } else {
    out.raw = synthesize_analytical_table(out.rows, std::get<OpenLogic>(state.logic));
  }
  return out;
}

Recomputed recompute(const ParameterState& state, const Store& store) {
  return recompute(state, compile_sql(state, store), store);
}

std::string rewrite_summary(const std::string& old_summary, const AnalyticalTable& old_table,
                            const AnalyticalTable& new_table, const SummaryMetrics& metrics,
                            const ParameterState& new_state, ModelProvider& provider) {
  Json m = Json::object();
  for (const auto& [k, v] : metrics) m[k] = v.render();
  const Json input = {{"old_summary", old_summary},
                      {"old_table", to_json(old_table)},
                      {"new_table", to_json(new_table)},
                      {"metrics", m},
                      {"state", to_json(new_state)}};
  const Json r = provider.call(Task::summary_rewrite, input);
  if (!r.is_object() || r.size() != 1 || !r.contains("text") || !r["text"].is_string()) {
    throw Error(ErrorKind::SchemaViolation, "summary response must be {text}");
  }
  return r["text"].get<std::string>();
}

std::string substitute_values(std::string_view text, const std::map<std::string, std::string>& old_values,
                              const std::map<std::string, std::string>& new_values) {
  // old text -> new text; strings claimed by two different replacements are
  // ambiguous and left alone.
  std::map<std::string, std::string> repl;
  std::set<std::string> ambiguous;
  for (const auto& [k, old] : old_values) {
    auto it = new_values.find(k);
    if (it == new_values.end() || old.empty() || it->second == old) continue;
    auto [pos, fresh] = repl.emplace(old, it->second);
    if (!fresh && pos->second != it->second) ambiguous.insert(old);
  }
  for (const auto& a : ambiguous) repl.erase(a);
  std::vector<std::pair<std::string, std::string>> ordered(repl.begin(), repl.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });

  auto is_num_char = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '.'; };
  auto is_word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  auto is_digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  std::string out;
  for (std::size_t p = 0; p < text.size();) {
    bool hit = false;
    for (const auto& [from, to] : ordered) {
      if (text.compare(p, from.size(), from) != 0) continue;
      const char before = p > 0 ? text[p - 1] : ' ';
      const char after = p + from.size() < text.size() ? text[p + from.size()] : ' ';
      const char after2 = p + from.size() + 1 < text.size() ? text[p + from.size() + 1] : ' ';
      const bool numeric = std::isdigit(static_cast<unsigned char>(from.front()));
      // A trailing '.' only blocks when a decimal digit follows it.
      const bool blocked = numeric ? (is_num_char(before) || is_digit(after) || (after == '.' && is_digit(after2)))
                                   : (is_word_char(before) || is_word_char(after));
      if (blocked) continue;
      out += to;
      p += from.size();
      hit = true;
      break;
    }
    if (!hit) out += text[p++];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Traces

Json to_json(const StageTrace& t) {
  Json j = {{"stage", t.stage},       {"input_digest", t.input_digest}, {"output_digest", t.output_digest},
            {"provider", t.provider}, {"ok", t.ok},                     {"output", t.output}};
  if (!t.error.empty()) j["error"] = t.error;
  return j;
}

StageTrace trace_from_json(const Json& j) {
  try {
    StageTrace t;
    t.stage = j.at("stage").get<std::string>();
    t.input_digest = j.at("input_digest").get<std::string>();
    t.output_digest = j.at("output_digest").get<std::string>();
    t.provider = j.at("provider").get<std::string>();
    t.ok = j.at("ok").get<bool>();
    t.output = j.at("output");
    if (j.contains("error")) t.error = j["error"].get<std::string>();
    return t;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, std::string("trace: ") + e.what());
  }
}

std::string traces_to_jsonl(const std::string& case_id, const std::vector<StageTrace>& traces) {
  std::string out;
  for (const auto& t : traces) {
    Json j = to_json(t);
    j["case"] = case_id;
    out += canonical_dump(j) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

std::string digest_of(const Json& j) { return sha256_hex(canonical_dump(j)); }

// Skeleton of the source table (headers only) used to carry display labels
// over to the recomputed table; built from the chart when no table is shown.
std::optional<AnalyticalTable> label_source(const SlideDocument& s, Structure structure) {
  if (const auto* t = first_with_payload(s, Role::table_body)) return std::get<AnalyticalTable>(t->payload);
  if (const auto* c = first_with_payload(s, Role::chart_body)) {
    const auto& chart = std::get<ChartSpec>(c->payload);
    AnalyticalTable t;
    t.structure = structure;
    std::vector<std::string> names;
    for (const auto& ser : chart.series) names.push_back(ser.name);
    if (structure == Structure::CF) {
      t.row_headers = chart.categories;
      t.col_headers = names;
    } else {
      t.row_headers = names;
      t.col_headers = chart.categories;
    }
    return t;
  }
  return std::nullopt;
}

}  // namespace

PipelineResult run_pipeline(const SlideDocument& source, const std::string& instruction, const Store& store,
                            ModelProvider& provider, const PipelineOptions& options) {
  const TemplatePack& pack = default_pack();
  PipelineResult result;
  bool failed = false;
  auto stage = [&](std::string_view name, const Json& input, auto&& body) {
    StageTrace t;
    t.stage = std::string(name);
    t.provider = provider.id();
    t.input_digest = digest_of(input);
    if (failed) {
      t.error = "skipped after an earlier failure";
    } else {
      try {
        t.output = body();
        t.output_digest = digest_of(t.output);
        t.ok = true;
      } catch (const std::exception& e) {
        t.error = e.what();
        failed = true;
      }
    }
    result.traces.push_back(std::move(t));
  };

  // 1. Layout: shapes lose their roles; predictions put them back.
  SlideDocument shapes = source;
  for (auto& e : shapes.elements) e.role = Role::unlabeled;
  Json layout_in = {{"canvas", {kCanvasWidth, kCanvasHeight}}, {"shapes", Json::array()}};
  for (const auto& e : shapes.elements) {
    layout_in["shapes"].push_back({{"id", e.id}, {"type", to_string(e.type)}, {"bbox", to_json(e.layout)},
                                   {"text", e.text}});
  }
  SlideDocument aligned;
  stage("layout", layout_in, [&] {
    const auto predictions = predictions_from_json(provider.call(Task::layout_parse, layout_in));
    aligned = match_elements(predictions, shapes, options.iou_threshold);
    Json roles = Json::array();
    for (const auto& e : aligned.elements) roles.push_back(to_string(e.role));
    return Json{{"roles", roles}};
  });

  // 2. Data source.
  const Json ds_in = failed ? Json::object() : slide_context(aligned, store);
  DataSource ds;
  stage("data_source", ds_in, [&] {
    ds = extract_data_source(ds_in, provider);
    return Json{{"table_name", ds.table_name}, {"slots", to_json(ds.slots)}};
  });

  // 3. Logic.
  const Json logic_in = failed ? Json::object() : table_context(aligned);
  ParameterState current;
  stage("logic", logic_in, [&] {
    current.table_name = ds.table_name;
    current.slots = ds.slots;
    if (options.mode == LogicMode::closed) {
      current.logic = extract_logic_closed(logic_in, provider);
    } else {
      current.logic = extract_logic_open(logic_in, provider);
    }
    return to_json(current.logic);
  });

  // 4. Instruction.
  const Json instr_in = {{"instruction", instruction}, {"state", failed ? Json(nullptr) : to_json(current)}};
  ParameterState updated;
  stage("instruction", instr_in, [&] {
    updated = parse_instruction(instruction, current, provider);
    return to_json(updated);
  });

  // 5. SQL.
  const Json sql_in = {{"state", failed ? Json(nullptr) : to_json(updated)}};
  CompiledSql sql;
  stage("sql", sql_in, [&] {
    if (options.provider_sql) {
      Json req = sql_in;
      req["columns"] = Json::array();
      for (auto f : kSchemaFields) req["columns"].push_back(std::string(f));
      const Json r = provider.call(Task::sql_generate, req);
      if (!r.is_object() || r.size() != 2 || !r.contains("sql") || !r["sql"].is_string() ||
          !r.contains("params") || !r["params"].is_array()) {
        throw Error(ErrorKind::SchemaViolation, "sql response must be {sql, params}");
      }
      sql.text = r["sql"].get<std::string>();
      for (const auto& p : r["params"]) {
        if (p.is_string()) {
          sql.params.emplace_back(p.get<std::string>());
        } else if (p.is_number()) {
          sql.params.emplace_back(p.get<double>());
        } else {
          throw Error(ErrorKind::SchemaViolation, "sql parameter must be string or number");
        }
      }
      parse_sql(sql.text, sql.params);
    } else {
      sql = compile_sql(updated, store);
    }
    Json params = Json::array();
    for (const auto& p : sql.params) std::visit([&](const auto& v) { params.push_back(v); }, p);
    return Json{{"sql", sql.text}, {"params", params}};
  });

  // 6. Recompute.
  const Json rc_in = {{"state", sql_in["state"]}, {"sql", failed ? Json(nullptr) : Json(sql.text)}};
  Recomputed rc;
  AnalyticalTable labeled;
  stage("recompute", rc_in, [&] {
    rc = recompute(updated, sql, store);
    labeled = rc.raw;
    if (auto skeleton = label_source(aligned, rc.raw.structure)) labeled = copy_header_labels(rc.raw, *skeleton);
    return to_json(rc.raw);
  });

  // 7. Summary.
  const SlideElement* old_summary = nullptr;
  for (const auto& e : aligned.elements) {
    if (e.role == Role::summary) old_summary = &e;
  }
  const Json sum_in = {{"summary", old_summary ? Json(old_summary->text) : Json(nullptr)},
                       {"table", failed ? Json(nullptr) : to_json(rc.raw)}};
  std::string summary_text;
  stage("summary", sum_in, [&] {
    SummaryMetrics metrics;
    const auto fid = std::holds_alternative<ClosedCall>(updated.logic)
                         ? std::optional<std::string>(std::get<ClosedCall>(updated.logic).function_id)
                         : infer_function_id(std::get<OpenLogic>(updated.logic));
    if (fid) metrics = extract_summary_metrics(rc.raw, *fid);
    AnalyticalTable old_table;
    if (const auto* t = first_with_payload(aligned, Role::table_body)) old_table = std::get<AnalyticalTable>(t->payload);
    summary_text = rewrite_summary(old_summary ? old_summary->text : "", old_table, labeled, metrics, updated,
                                   provider);
    return Json{{"text", summary_text}};
  });

  if (failed) return result;

  // Final rendering onto the aligned slide: same ids, order and geometry.
  const auto old_values = text_values(pack, current);
  const auto new_values = text_values(pack, updated);
  std::map<std::string, Content> contents;
  for (const auto& e : aligned.elements) {
    switch (e.role) {
      case Role::title:
      case Role::caption:
        contents[e.id] = substitute_values(e.text, old_values, new_values);
        break;
      case Role::summary:
        contents[e.id] = summary_text;
        break;
      case Role::table_body:
        if (std::holds_alternative<AnalyticalTable>(e.payload)) contents[e.id] = labeled;
        break;
      case Role::chart_body:
        if (const auto* c = std::get_if<ChartSpec>(&e.payload)) contents[e.id] = chart_from_table(labeled, c->chart_type);
        break;
      case Role::unlabeled:
        break;
    }
  }
  try {
    result.slide = repopulate(aligned, contents);
  } catch (const Error&) {
    result.slide.reset();
  }
  return result;
}

}  // namespace dynaslide
