#include "dynaslide/state.hpp"

#include <algorithm>

#include "dynaslide/datastore.hpp"

namespace dynaslide {

std::string_view to_string(LogicMode m) { return m == LogicMode::closed ? "closed" : "open"; }

LogicMode parse_logic_mode(std::string_view s) {
  if (s == "closed") return LogicMode::closed;
  if (s == "open") return LogicMode::open;
  throw Error(ErrorKind::InvalidConfig, "mode must be closed or open, got '" + std::string(s) + "'");
}

std::vector<std::string> function_variables(const FunctionInfo& f) {
  std::vector<std::string> v = {"city"};
  if (f.scope == Scope::block) v.push_back("block");
  if (f.period == Period::yearly) {
    v.insert(v.end(), {"start_year", "end_year"});
  } else {
    v.insert(v.end(), {"start_month", "end_month"});
  }
  return v;
}

namespace {

const std::string* find_var(const FilterSet& f, const std::string& k) {
  auto it = f.variables.find(k);
  return it == f.variables.end() ? nullptr : &it->second;
}

int parse_year(const std::string& s) {
  if (s.size() != 4 || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw Error(ErrorKind::InvalidBounds, "bad year '" + s + "'");
  }
  return std::stoi(s);
}

Date year_start(int y) { return make_date(y, 1, 1); }
Date year_end(int y) { return make_date(y, 12, 31); }

// Param name -> the binned field its step drives.
const std::map<std::string, std::string>& param_fields() {
  static const std::map<std::string, std::string> kFields = {{"area_bin_step", "dim_area"},
                                                             {"price_bin_step", "price_m"}};
  return kFields;
}

void sync_time_constraint(OpenLogic& l, const DateRange& period) {
  for (auto& c : l.constraints) {
    if (c.field == "year") {
      c.start = static_cast<double>(static_cast<int>(period.from.year()));
      c.end = static_cast<double>(static_cast<int>(period.to.year()) + 1);
    } else if (c.field == "month") {
      c.start = format_month(month_ordinal(period.from));
      c.end = format_month(month_ordinal(period.to) + 1);
    }
  }
}

}  // namespace

DateRange period_of(const FilterSet& f) {
  const auto* sy = find_var(f, "start_year");
  const auto* ey = find_var(f, "end_year");
  const auto* sm = find_var(f, "start_month");
  const auto* em = find_var(f, "end_month");
  DateRange r;
  if (sy && ey) {
    r = {year_start(parse_year(*sy)), year_end(parse_year(*ey))};
  } else if (sm && em) {
    r = {first_day_of_month(parse_month(*sm)), last_day_of_month(parse_month(*em))};
  } else {
    throw Error(ErrorKind::MissingKey, "filter set names no start/end year or month pair");
  }
  if (r.to < r.from) throw Error(ErrorKind::InvalidBounds, "period ends before it starts");
  return r;
}

ParameterState state_from_filters(const FilterSet& f, LogicMode mode) {
  if (!f.table_name) throw Error(ErrorKind::MissingKey, "table_name");
  if (!f.function_id) throw Error(ErrorKind::MissingKey, "function_id");
  const FunctionInfo& info = function_info(*f.function_id);
  ParameterState s;
  s.table_name = *f.table_name;
  const auto* city = find_var(f, "city");
  if (!city) throw Error(ErrorKind::MissingKey, "city");
  s.slots.city = *city;
  if (info.scope == Scope::block) {
    const auto* block = find_var(f, "block");
    if (!block) throw Error(ErrorKind::MissingKey, "block");
    s.slots.block = *block;
  }
  const DateRange period = period_of(f);
  s.slots.date_code = period;
  ClosedCall call{info.id, f.params};
  validate_params(info, call.params);
  if (mode == LogicMode::closed) {
    s.logic = call;
  } else {
    s.logic = to_open_logic(call, period);
  }
  return s;
}

ParameterState apply_query_filters(ParameterState s, const FilterSet& delta) {
  if (delta.table_name) s.table_name = *delta.table_name;
  bool dates_changed = false;
  for (const auto& [k, v] : delta.variables) {
    if (k == "city") {
      s.slots.city = v;
    } else if (k == "block") {
      s.slots.block = v;
    } else if (k == "project") {
      s.slots.project = v;
    } else if (k == "start_year" || k == "end_year" || k == "start_month" || k == "end_month") {
      DateRange r = s.slots.date_code.value_or(DateRange{default_window().first, default_window().last});
      if (k == "start_year") r.from = year_start(parse_year(v));
      if (k == "end_year") r.to = year_end(parse_year(v));
      if (k == "start_month") r.from = first_day_of_month(parse_month(v));
      if (k == "end_month") r.to = last_day_of_month(parse_month(v));
      s.slots.date_code = r;
      dates_changed = true;
    } else {
      throw Error(ErrorKind::UnknownVariable, k);
    }
  }
  if (auto* call = std::get_if<ClosedCall>(&s.logic)) {
    if (delta.function_id) call->function_id = *delta.function_id;
    for (const auto& [k, v] : delta.params) call->params[k] = v;
  } else {
    auto& open = std::get<OpenLogic>(s.logic);
    for (const auto& [k, v] : delta.params) {
      auto field = param_fields().find(k);
      if (field == param_fields().end()) throw Error(ErrorKind::InvalidParam, k);
      for (auto& c : open.constraints) {
        if (c.field == field->second) c.step = v;
      }
    }
    if (dates_changed && s.slots.date_code) sync_time_constraint(open, *s.slots.date_code);
  }
  return s;
}

std::map<std::string, double> logic_params(const Logic& logic) {
  if (const auto* call = std::get_if<ClosedCall>(&logic)) return call->params;
  std::map<std::string, double> out;
  for (const auto& c : std::get<OpenLogic>(logic).constraints) {
    const double* step = std::get_if<double>(&c.step);
    if (!step) continue;
    for (const auto& [name, field] : param_fields()) {
      if (field == c.field) out[name] = *step;
    }
  }
  return out;
}

std::optional<std::string> infer_function_id(const OpenLogic& logic) {
  const DateRange dummy{make_date(2020, 1, 1), make_date(2021, 12, 31)};
  for (const auto& f : function_registry()) {
    ClosedCall call{f.id, {}};
    for (const auto& p : f.params) call.params[p] = parameter_candidates().at(p).front();
    const OpenLogic ref = to_open_logic(call, dummy);
    if (ref.structure != logic.structure || ref.row_keys != logic.row_keys || ref.col_keys != logic.col_keys ||
        ref.fields != logic.fields || ref.ops != logic.ops || ref.constraints.size() != logic.constraints.size()) {
      continue;
    }
    bool same = true;
    for (std::size_t i = 0; i < ref.constraints.size(); ++i) {
      same = same && ref.constraints[i].field == logic.constraints[i].field &&
             ref.constraints[i].op_template == logic.constraints[i].op_template;
    }
    if (same) return f.id;
  }
  return std::nullopt;
}

std::string function_id_of(const Logic& logic) {
  if (const auto* call = std::get_if<ClosedCall>(&logic)) return call->function_id;
  auto id = infer_function_id(std::get<OpenLogic>(logic));
  if (!id) throw Error(ErrorKind::UnknownFunction, "open logic matches no registered function");
  return *id;
}

std::map<std::string, std::string> text_values(const TemplatePack& pack, const ParameterState& s) {
  // Slot values in their raw form; resolve_variables applies the derivations.
  std::map<std::string, std::string> bindings;
  if (s.slots.city) bindings["city"] = *s.slots.city;
  if (s.slots.block) bindings["block"] = *s.slots.block;
  if (s.slots.project) bindings["project"] = *s.slots.project;
  if (s.slots.date_code) {
    bindings["start_year"] = bindings["start_month"] = format_date(s.slots.date_code->from);
    bindings["end_year"] = bindings["end_month"] = format_date(s.slots.date_code->to);
    bindings["month"] = format_date(s.slots.date_code->from);
  }
  std::vector<std::string> vars;
  for (const auto& [k, v] : bindings) {
    if (pack.field_mapping.count(k)) vars.push_back(k);
  }
  auto out = resolve_variables(pack, vars, bindings);
  if (!s.table_name.empty()) {
    try {
      out[std::string(kMarketPlaceholder)] = split_table_name(s.table_name).first;
    } catch (const Error&) {
    }
  }
  for (const auto& [k, v] : logic_params(s.logic)) out[k] = format_number(v);
  return out;
}

void add_metric_values(std::map<std::string, std::string>& values, const SummaryMetrics& m) {
  for (const auto& [k, v] : m) values[k] = v.render();
}

bool template_bindable(std::string_view body, const std::map<std::string, std::string>& values) {
  const auto names = placeholders(body);
  return std::all_of(names.begin(), names.end(), [&](const std::string& n) { return values.count(n) > 0; });
}

}  // namespace dynaslide
