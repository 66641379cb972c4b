#include "dynaslide/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace dynaslide {

namespace {

[[noreturn]] void violation(std::string_view what, const std::string& detail) {
  throw Error(ErrorKind::SchemaViolation, std::string(what) + ": " + detail);
}

void check_keys(const Json& j, std::string_view what, std::initializer_list<std::string_view> required,
                std::initializer_list<std::string_view> optional = {}) {
  if (!j.is_object()) violation(what, "expected an object");
  for (auto k : required) {
    if (!j.contains(std::string(k))) violation(what, "missing key '" + std::string(k) + "'");
  }
  for (const auto& [k, v] : j.items()) {
    const bool known = std::find(required.begin(), required.end(), k) != required.end() ||
                       std::find(optional.begin(), optional.end(), k) != optional.end();
    if (!known) violation(what, "unexpected key '" + k + "'");
  }
}

const std::string& get_string(const Json& j, std::string_view key, std::string_view what) {
  const auto& v = j.at(std::string(key));
  if (!v.is_string()) violation(what, "'" + std::string(key) + "' must be a string");
  return v.get_ref<const std::string&>();
}

double get_number(const Json& j, std::string_view key, std::string_view what) {
  const auto& v = j.at(std::string(key));
  if (!v.is_number()) violation(what, "'" + std::string(key) + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) violation(what, "'" + std::string(key) + "' must be finite");
  return d;
}

std::int64_t get_integer(const Json& j, std::string_view key, std::string_view what) {
  const auto& v = j.at(std::string(key));
  if (!v.is_number_integer()) violation(what, "'" + std::string(key) + "' must be an integer");
  return v.get<std::int64_t>();
}

std::vector<std::string> get_strings(const Json& j, std::string_view key, std::string_view what) {
  const auto& v = j.at(std::string(key));
  if (!v.is_array()) violation(what, "'" + std::string(key) + "' must be an array");
  std::vector<std::string> out;
  for (const auto& s : v) {
    if (!s.is_string()) violation(what, "'" + std::string(key) + "' must hold strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

void check_version(const Json& j, std::string_view what) {
  if (!j.at("format_version").is_number_integer() || j.at("format_version").get<int>() != kFormatVersion) {
    violation(what, "unsupported format_version");
  }
}

template <typename F>
auto wrap_parse(std::string_view what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SchemaViolation) throw;
    violation(what, e.what());
  } catch (const Json::exception& e) {
    violation(what, e.what());
  }
}

Json cell_to_json(const Cell& c) { return c ? Json(*c) : Json(std::string(kNullMarker)); }

Cell cell_from_json(const Json& j, std::string_view what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string() && j.get<std::string>() == kNullMarker) return std::nullopt;
  violation(what, "cell must be a number or the null marker");
}

Json constraint_value_to_json(const ConstraintValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return nullptr;
}

ConstraintValue constraint_value_from_json(const Json& j) {
  if (j.is_null()) return std::monostate{};
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  violation("OpenLogic", "constraint value must be null, number or string");
}

Json string_map_to_json(const std::map<std::string, std::string>& m) {
  Json j = Json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

std::map<std::string, std::string> string_map_from_json(const Json& j, std::string_view what) {
  if (!j.is_object()) violation(what, "expected an object of strings");
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) violation(what, "value of '" + k + "' must be a string");
    out[k] = v.get<std::string>();
  }
  return out;
}

Json number_map_to_json(const std::map<std::string, double>& m) {
  Json j = Json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

std::map<std::string, double> number_map_from_json(const Json& j, std::string_view what) {
  if (!j.is_object()) violation(what, "expected an object of numbers");
  std::map<std::string, double> out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) violation(what, "value of '" + k + "' must be a number");
    out[k] = v.get<double>();
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Json to_json(const TransactionRecord& r) {
  return Json{{"city", r.city},
              {"block", r.block},
              {"project", r.project},
              {"date_code", format_date(r.date_code)},
              {"supply_sets", r.supply_sets},
              {"trade_sets", r.trade_sets},
              {"dim_area", r.dim_area},
              {"dim_price", r.dim_price},
              {"dim_unit_price", r.dim_unit_price}};
}

TransactionRecord record_from_json(const Json& j) {
  return wrap_parse("TransactionRecord", [&] {
    check_keys(j, "TransactionRecord",
               {"city", "block", "project", "date_code", "supply_sets", "trade_sets", "dim_area", "dim_price",
                "dim_unit_price"},
               {"table"});
    TransactionRecord r;
    r.city = get_string(j, "city", "TransactionRecord");
    r.block = get_string(j, "block", "TransactionRecord");
    r.project = get_string(j, "project", "TransactionRecord");
    r.date_code = parse_date(get_string(j, "date_code", "TransactionRecord"));
    r.supply_sets = get_integer(j, "supply_sets", "TransactionRecord");
    r.trade_sets = get_integer(j, "trade_sets", "TransactionRecord");
    r.dim_area = get_number(j, "dim_area", "TransactionRecord");
    r.dim_price = get_number(j, "dim_price", "TransactionRecord");
    r.dim_unit_price = get_number(j, "dim_unit_price", "TransactionRecord");
    return r;
  });
}

Json to_json(const Rect& r) { return Json{{"x", r.x}, {"y", r.y}, {"width", r.width}, {"height", r.height}}; }

Rect rect_from_json(const Json& j) {
  return wrap_parse("Rect", [&] {
    check_keys(j, "Rect", {"x", "y", "width", "height"});
    return Rect{static_cast<int>(get_integer(j, "x", "Rect")), static_cast<int>(get_integer(j, "y", "Rect")),
                static_cast<int>(get_integer(j, "width", "Rect")),
                static_cast<int>(get_integer(j, "height", "Rect"))};
  });
}

Json to_json(const AnalyticalTable& t) {
  Json cells = Json::array();
  for (const auto& row : t.cells) {
    Json r = Json::array();
    for (const auto& c : row) r.push_back(cell_to_json(c));
    cells.push_back(std::move(r));
  }
  return Json{{"structure", to_string(t.structure)},
              {"index_header", t.index_header},
              {"index_canon", t.index_canon},
              {"row_headers", t.row_headers},
              {"col_headers", t.col_headers},
              {"row_canon", t.row_canon},
              {"col_canon", t.col_canon},
              {"cells", std::move(cells)}};
}

AnalyticalTable table_from_json(const Json& j) {
  return wrap_parse("AnalyticalTable", [&] {
    constexpr std::string_view w = "AnalyticalTable";
    check_keys(j, w,
               {"structure", "index_header", "index_canon", "row_headers", "col_headers", "row_canon", "col_canon",
                "cells"});
    AnalyticalTable t;
    t.structure = parse_structure(get_string(j, "structure", w));
    t.index_header = get_string(j, "index_header", w);
    t.index_canon = get_string(j, "index_canon", w);
    t.row_headers = get_strings(j, "row_headers", w);
    t.col_headers = get_strings(j, "col_headers", w);
    t.row_canon = get_strings(j, "row_canon", w);
    t.col_canon = get_strings(j, "col_canon", w);
    if (!j.at("cells").is_array()) violation(w, "cells must be an array");
    for (const auto& row : j.at("cells")) {
      if (!row.is_array()) violation(w, "cell rows must be arrays");
      std::vector<Cell> r;
      for (const auto& c : row) r.push_back(cell_from_json(c, w));
      t.cells.push_back(std::move(r));
    }
    validate_table(t);
    return t;
  });
}

Json to_json(const ChartSpec& c) {
  Json series = Json::array();
  for (const auto& s : c.series) {
    Json values = Json::array();
    for (const auto& v : s.values) values.push_back(v ? Json(*v) : Json(nullptr));
    series.push_back(Json{{"name", s.name}, {"values", std::move(values)}});
  }
  return Json{{"chart_type", to_string(c.chart_type)}, {"categories", c.categories}, {"series", std::move(series)}};
}

ChartSpec chart_from_json(const Json& j) {
  return wrap_parse("ChartSpec", [&] {
    constexpr std::string_view w = "ChartSpec";
    check_keys(j, w, {"chart_type", "categories", "series"});
    ChartSpec c;
    c.chart_type = parse_chart_type(get_string(j, "chart_type", w));
    c.categories = get_strings(j, "categories", w);
    if (!j.at("series").is_array()) violation(w, "series must be an array");
    for (const auto& s : j.at("series")) {
      check_keys(s, w, {"name", "values"});
      Series out;
      out.name = get_string(s, "name", w);
      if (!s.at("values").is_array()) violation(w, "values must be an array");
      for (const auto& v : s.at("values")) {
        if (v.is_null()) {
          out.values.push_back(std::nullopt);
        } else if (v.is_number()) {
          out.values.push_back(v.get<double>());
        } else {
          violation(w, "series values must be numbers or null");
        }
      }
      c.series.push_back(std::move(out));
    }
    validate_chart(c);
    return c;
  });
}

Json to_json(const SlideElement& e) {
  Json j{{"id", e.id},
         {"type", to_string(e.type)},
         {"role", to_string(e.role)},
         {"text", e.text},
         {"layout", to_json(e.layout)}};
  if (const auto* t = std::get_if<AnalyticalTable>(&e.payload)) j["table"] = to_json(*t);
  if (const auto* c = std::get_if<ChartSpec>(&e.payload)) j["chart"] = to_json(*c);
  return j;
}

SlideElement element_from_json(const Json& j) {
  return wrap_parse("SlideElement", [&] {
    constexpr std::string_view w = "SlideElement";
    // "svg" is the relative path of the rendered chart written next to dataset slides.
    check_keys(j, w, {"id", "type", "role", "text", "layout"}, {"table", "chart", "svg"});
    SlideElement e;
    e.id = get_string(j, "id", w);
    e.type = parse_element_type(get_string(j, "type", w));
    e.role = parse_role(get_string(j, "role", w));
    e.text = get_string(j, "text", w);
    e.layout = rect_from_json(j.at("layout"));
    if (j.contains("table") && j.contains("chart")) violation(w, "element carries both a table and a chart");
    if (j.contains("table")) e.payload = table_from_json(j.at("table"));
    if (j.contains("chart")) e.payload = chart_from_json(j.at("chart"));
    return e;
  });
}

Json to_json(const SlideDocument& s) {
  Json elements = Json::array();
  for (const auto& e : s.elements) elements.push_back(to_json(e));
  return Json{{"format_version", kFormatVersion},
              {"theme_id", s.theme_id},
              {"subtemplate_id", s.subtemplate_id},
              {"elements", std::move(elements)}};
}

SlideDocument slide_from_json(const Json& j) {
  return wrap_parse("SlideDocument", [&] {
    constexpr std::string_view w = "SlideDocument";
    check_keys(j, w, {"format_version", "theme_id", "subtemplate_id", "elements"});
    check_version(j, w);
    SlideDocument s;
    s.theme_id = static_cast<int>(get_integer(j, "theme_id", w));
    s.subtemplate_id = static_cast<int>(get_integer(j, "subtemplate_id", w));
    if (!j.at("elements").is_array()) violation(w, "elements must be an array");
    for (const auto& e : j.at("elements")) s.elements.push_back(element_from_json(e));
    return s;
  });
}

Json to_json(const FilterSet& f) {
  Json j = Json::object();
  if (f.table_name) j["table_name"] = *f.table_name;
  if (f.function_id) j["function_id"] = *f.function_id;
  j["variables"] = string_map_to_json(f.variables);
  j["params"] = number_map_to_json(f.params);
  return j;
}

FilterSet filters_from_json(const Json& j) {
  return wrap_parse("FilterSet", [&] {
    constexpr std::string_view w = "FilterSet";
    check_keys(j, w, {}, {"table_name", "function_id", "variables", "params"});
    FilterSet f;
    if (j.contains("table_name")) f.table_name = get_string(j, "table_name", w);
    if (j.contains("function_id")) f.function_id = get_string(j, "function_id", w);
    if (j.contains("variables")) f.variables = string_map_from_json(j.at("variables"), w);
    if (j.contains("params")) f.params = number_map_from_json(j.at("params"), w);
    return f;
  });
}

Json to_json(const TemplateSlot& s) {
  Json j{{"role", to_string(s.role)}, {"layout", to_json(s.layout)}, {"template_id", s.template_id}};
  if (s.chart_type) j["chart_type"] = to_string(*s.chart_type);
  return j;
}

TemplateSlot slot_from_json(const Json& j) {
  return wrap_parse("TemplateSlot", [&] {
    constexpr std::string_view w = "TemplateSlot";
    check_keys(j, w, {"role", "layout", "template_id"}, {"chart_type"});
    TemplateSlot s;
    s.role = parse_role(get_string(j, "role", w));
    s.layout = rect_from_json(j.at("layout"));
    s.template_id = get_string(j, "template_id", w);
    if (j.contains("chart_type")) s.chart_type = parse_chart_type(get_string(j, "chart_type", w));
    return s;
  });
}

Json to_json(const SlideMetadata& m) {
  Json slots = Json::array();
  for (const auto& s : m.template_slide) slots.push_back(to_json(s));
  Json j{{"format_version", kFormatVersion},
         {"slide_filters", to_json(m.slide_filters)},
         {"template_slide", std::move(slots)},
         {"header_aliases", string_map_to_json(m.header_aliases)}};
  if (m.query_filters) j["query_filters"] = to_json(*m.query_filters);
  if (m.update_filters) j["update_filters"] = to_json(*m.update_filters);
  if (m.output_slide) j["output_slide"] = *m.output_slide;
  return j;
}

SlideMetadata metadata_from_json(const Json& j) {
  return wrap_parse("SlideMetadata", [&] {
    constexpr std::string_view w = "SlideMetadata";
    check_keys(j, w, {"format_version", "slide_filters", "template_slide", "header_aliases"},
               {"query_filters", "update_filters", "output_slide"});
    check_version(j, w);
    SlideMetadata m;
    m.slide_filters = filters_from_json(j.at("slide_filters"));
    if (!j.at("template_slide").is_array()) violation(w, "template_slide must be an array");
    for (const auto& s : j.at("template_slide")) m.template_slide.push_back(slot_from_json(s));
    m.header_aliases = string_map_from_json(j.at("header_aliases"), w);
    if (j.contains("query_filters")) m.query_filters = filters_from_json(j.at("query_filters"));
    if (j.contains("update_filters")) m.update_filters = filters_from_json(j.at("update_filters"));
    if (j.contains("output_slide")) m.output_slide = get_string(j, "output_slide", w);
    return m;
  });
}

// ---------------------------------------------------------------------------
// Parameter state

Json to_json(const OpenLogic& l) {
  Json c = Json::array();
  for (const auto& spec : l.constraints) {
    Json step = std::holds_alternative<double>(spec.step) ? Json(std::get<double>(spec.step))
                                                          : Json(std::get<std::string>(spec.step));
    c.push_back(Json::array({spec.field, spec.op_template, constraint_value_to_json(spec.start),
                             constraint_value_to_json(spec.end), std::move(step)}));
  }
  Json ops = Json::array();
  for (auto o : l.ops) ops.push_back(to_string(o));
  return Json{{"kind", "open"},
              {"S", to_string(l.structure)},
              {"H", Json{{"row", l.row_keys}, {"col", l.col_keys}}},
              {"C", std::move(c)},
              {"F", l.fields},
              {"O", std::move(ops)}};
}

OpenLogic open_logic_from_json(const Json& j) {
  return wrap_parse("OpenLogic", [&] {
    constexpr std::string_view w = "OpenLogic";
    check_keys(j, w, {"kind", "S", "H", "C", "F", "O"});
    if (get_string(j, "kind", w) != "open") violation(w, "kind must be 'open'");
    OpenLogic l;
    l.structure = parse_structure(get_string(j, "S", w));
    check_keys(j.at("H"), w, {"row", "col"});
    l.row_keys = get_strings(j.at("H"), "row", w);
    l.col_keys = get_strings(j.at("H"), "col", w);
    const Json& c = j.at("C");
    if (!c.is_array()) violation(w, "C must be an array");
    // A single bare 5-tuple is accepted and normalised to a one-element list.
    const bool single = !c.empty() && c.front().is_string();
    const Json list = single ? Json::array({c}) : c;
    for (const auto& t : list) {
      if (!t.is_array() || t.size() != 5) violation(w, "each constraint must be a 5-element list");
      if (!t[0].is_string() || !t[1].is_string()) violation(w, "constraint k and T must be strings");
      ConstraintSpec spec;
      spec.field = t[0].get<std::string>();
      spec.op_template = t[1].get<std::string>();
      spec.start = constraint_value_from_json(t[2]);
      spec.end = constraint_value_from_json(t[3]);
      if (t[4].is_number()) {
        spec.step = t[4].get<double>();
      } else if (t[4].is_string()) {
        spec.step = t[4].get<std::string>();
      } else if (t[4].is_null() && spec.op_template == "=") {
        spec.step = 0.0;
      } else {
        violation(w, "constraint step must be a number or parameter name");
      }
      l.constraints.push_back(std::move(spec));
    }
    l.fields = get_strings(j, "F", w);
    for (const auto& o : get_strings(j, "O", w)) l.ops.push_back(parse_aggregation(o));
    try {
      validate_open_logic(l);
    } catch (const Error& e) {
      violation(w, e.what());
    }
    return l;
  });
}

Json to_json(const Logic& l) {
  if (const auto* c = std::get_if<ClosedCall>(&l)) {
    return Json{{"kind", "closed"}, {"function_id", c->function_id}, {"params", number_map_to_json(c->params)}};
  }
  return to_json(std::get<OpenLogic>(l));
}

Logic logic_from_json(const Json& j) {
  return wrap_parse("Logic", [&]() -> Logic {
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) violation("Logic", "missing kind");
    if (j.at("kind") == "open") return open_logic_from_json(j);
    check_keys(j, "ClosedCall", {"kind", "function_id", "params"});
    if (j.at("kind") != "closed") violation("Logic", "kind must be 'closed' or 'open'");
    ClosedCall c;
    c.function_id = get_string(j, "function_id", "ClosedCall");
    c.params = number_map_from_json(j.at("params"), "ClosedCall");
    return c;
  });
}

Json to_json(const Slots& s) {
  auto str = [](const std::optional<std::string>& v) { return v ? Json(*v) : Json(nullptr); };
  auto num = [](const std::optional<NumRange>& v) {
    return v ? Json{{"min", v->min}, {"max", v->max}} : Json(nullptr);
  };
  Json dates = s.date_code ? Json{{"from", format_date(s.date_code->from)}, {"to", format_date(s.date_code->to)}}
                           : Json(nullptr);
  return Json{{"city", str(s.city)},
              {"block", str(s.block)},
              {"project", str(s.project)},
              {"date_code", std::move(dates)},
              {"supply_sets", num(s.supply_sets)},
              {"trade_sets", num(s.trade_sets)},
              {"dim_area", num(s.dim_area)},
              {"dim_price", num(s.dim_price)},
              {"dim_unit_price", num(s.dim_unit_price)}};
}

Slots slots_from_json(const Json& j) {
  return wrap_parse("Slots", [&] {
    constexpr std::string_view w = "Slots";
    check_keys(j, w,
               {"city", "block", "project", "date_code", "supply_sets", "trade_sets", "dim_area", "dim_price",
                "dim_unit_price"});
    auto str = [&](const char* key) -> std::optional<std::string> {
      if (j.at(key).is_null()) return std::nullopt;
      return get_string(j, key, w);
    };
    auto num = [&](const char* key) -> std::optional<NumRange> {
      const Json& v = j.at(key);
      if (v.is_null()) return std::nullopt;
      check_keys(v, w, {"min", "max"});
      NumRange r{get_number(v, "min", w), get_number(v, "max", w)};
      if (r.min > r.max) violation(w, std::string(key) + " range is inverted");
      return r;
    };
    Slots s;
    s.city = str("city");
    s.block = str("block");
    s.project = str("project");
    if (!j.at("date_code").is_null()) {
      const Json& d = j.at("date_code");
      check_keys(d, w, {"from", "to"});
      DateRange r{parse_date(get_string(d, "from", w)), parse_date(get_string(d, "to", w))};
      if (r.to < r.from) violation(w, "date_code range is inverted");
      s.date_code = r;
    }
    s.supply_sets = num("supply_sets");
    s.trade_sets = num("trade_sets");
    s.dim_area = num("dim_area");
    s.dim_price = num("dim_price");
    s.dim_unit_price = num("dim_unit_price");
    return s;
  });
}

Json to_json(const ParameterState& p) {
  return Json{{"table_name", p.table_name}, {"slots", to_json(p.slots)}, {"logic", to_json(p.logic)}};
}

ParameterState parameter_state_from_json(const Json& j) {
  return wrap_parse("ParameterState", [&] {
    constexpr std::string_view w = "ParameterState";
    check_keys(j, w, {"table_name", "slots", "logic"});
    ParameterState p;
    p.table_name = get_string(j, "table_name", w);
    if (p.table_name.empty()) violation(w, "table_name is empty");
    p.slots = slots_from_json(j.at("slots"));
    p.logic = logic_from_json(j.at("logic"));
    return p;
  });
}

// ---------------------------------------------------------------------------

std::string canonical_dump(const Json& j) { return j.dump(); }

Json parse_json_text(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::string& path) { return parse_json_text(read_text_file(path)); }

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path);
}

}  // namespace dynaslide
