#include "dynaslide/templates.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "default_pack_data.hpp"
#include "dynaslide/stats.hpp"

namespace dynaslide {

std::string_view to_string(TemplateKind k) {
  switch (k) {
    case TemplateKind::title: return "title";
    case TemplateKind::caption: return "caption";
    case TemplateKind::summary: return "summary";
    case TemplateKind::instruction: return "instruction";
  }
  return "?";
}

namespace {

[[noreturn]] void bad_pack(const std::string& detail) { throw Error(ErrorKind::SchemaViolation, "pack: " + detail); }

TemplateKind parse_kind(const std::string& s) {
  if (s == "title") return TemplateKind::title;
  if (s == "caption") return TemplateKind::caption;
  if (s == "summary") return TemplateKind::summary;
  if (s == "instruction") return TemplateKind::instruction;
  bad_pack("unknown template kind '" + s + "'");
}

Rect rect_from_array(const Json& j) {
  if (!j.is_array() || j.size() != 4) bad_pack("layout must be [x, y, width, height]");
  for (const auto& v : j) {
    if (!v.is_number_integer()) bad_pack("layout values must be integers");
  }
  return Rect{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

}  // namespace

const Theme& TemplatePack::theme(int id) const {
  for (const auto& t : themes) {
    if (t.id == id) return t;
  }
  throw Error(ErrorKind::UnknownSubtemplate, "theme " + std::to_string(id));
}

const Subtemplate& TemplatePack::subtemplate(int id) const {
  for (const auto& s : subtemplates) {
    if (s.id == id) return s;
  }
  throw Error(ErrorKind::UnknownSubtemplate, "subtemplate " + std::to_string(id));
}

const TextTemplate& TemplatePack::text_template(std::string_view id) const {
  for (const auto& t : templates) {
    if (t.id == id) return t;
  }
  throw Error(ErrorKind::NoApplicableTemplate, "template '" + std::string(id) + "'");
}

std::vector<const TextTemplate*> TemplatePack::titles(int theme_id) const {
  std::vector<const TextTemplate*> out;
  for (const auto& t : templates) {
    if (t.kind == TemplateKind::title && t.theme_id == theme_id) out.push_back(&t);
  }
  return out;
}

std::vector<const TextTemplate*> TemplatePack::for_function(TemplateKind kind, std::string_view function_id) const {
  std::vector<const TextTemplate*> out;
  for (const auto& t : templates) {
    if (t.kind == kind && t.function_id && *t.function_id == function_id) out.push_back(&t);
  }
  return out;
}

std::vector<const TextTemplate*> TemplatePack::instructions(std::string_view scenario) const {
  std::vector<const TextTemplate*> out;
  for (const auto& t : templates) {
    if (t.kind == TemplateKind::instruction && t.scenario && *t.scenario == scenario) out.push_back(&t);
  }
  return out;
}

std::vector<int> TemplatePack::subtemplates_of(int theme_id) const {
  std::vector<int> out;
  for (const auto& s : subtemplates) {
    if (s.theme_id == theme_id) out.push_back(s.id);
  }
  return out;
}

TemplatePack parse_pack(const Json& dictionaries, const Json& templates) {
  TemplatePack pack;
  try {
    if (dictionaries.value("format_version", 0) != kFormatVersion) bad_pack("dictionaries format_version");
    if (templates.value("format_version", 0) != kFormatVersion) bad_pack("templates format_version");
    for (const auto& [k, v] : dictionaries.at("field_mapping").items()) {
      pack.field_mapping[k] = {v.at("source_column").get<std::string>(), v.at("derivation").get<std::string>()};
    }
    for (const auto& [k, v] : dictionaries.at("parameter_candidates").items()) {
      pack.parameter_candidates[k] = v.get<std::vector<double>>();
    }
    for (const auto& [k, v] : dictionaries.at("header_aliases").items()) {
      pack.header_aliases[k] = v.get<std::vector<std::string>>();
    }
    pack.pack_version = templates.at("pack_version").get<std::string>();
    for (const auto& t : templates.at("themes")) {
      Theme th;
      th.id = t.at("id").get<int>();
      th.name = t.at("name").get<std::string>();
      th.pack_defined = t.at("pack_defined").get<bool>();
      if (t.contains("market")) th.market = t.at("market").get<std::string>();
      th.functions = t.at("functions").get<std::vector<std::string>>();
      pack.themes.push_back(std::move(th));
    }
    for (const auto& s : templates.at("subtemplates")) {
      Subtemplate st;
      st.id = s.at("id").get<int>();
      st.theme_id = s.at("theme_id").get<int>();
      for (const auto& slot : s.at("slots")) {
        TemplateSlot ts;
        ts.role = parse_role(slot.at("role").get<std::string>());
        ts.layout = rect_from_array(slot.at("layout"));
        if (slot.contains("chart_type")) ts.chart_type = parse_chart_type(slot.at("chart_type").get<std::string>());
        st.slots.push_back(std::move(ts));
      }
      pack.subtemplates.push_back(std::move(st));
    }
    for (const auto& t : templates.at("templates")) {
      TextTemplate tt;
      tt.id = t.at("id").get<std::string>();
      tt.kind = parse_kind(t.at("kind").get<std::string>());
      tt.body = t.at("body").get<std::string>();
      if (t.contains("function_id")) tt.function_id = t.at("function_id").get<std::string>();
      if (t.contains("theme_id")) tt.theme_id = t.at("theme_id").get<int>();
      if (t.contains("scenario")) tt.scenario = t.at("scenario").get<std::string>();
      pack.templates.push_back(std::move(tt));
    }
  } catch (const Json::exception& e) {
    bad_pack(e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SchemaViolation) throw;
    bad_pack(e.what());
  }
  validate_pack(pack);
  return pack;
}

TemplatePack load_pack(const std::string& dir) {
  return parse_pack(read_json_file(dir + "/dictionaries.json"), read_json_file(dir + "/templates.json"));
}

const TemplatePack& default_pack() {
  static const TemplatePack pack =
      parse_pack(parse_json_text(kDefaultPackDictionaries), parse_json_text(kDefaultPackTemplates));
  return pack;
}

std::vector<std::string> placeholders(std::string_view body) {
  std::vector<std::string> out;
  for (std::size_t p = 0; p < body.size(); ++p) {
    if (body[p] != '{') continue;
    const auto close = body.find('}', p + 1);
    if (close == std::string_view::npos) break;
    const auto name = body.substr(p + 1, close - p - 1);
    const bool ident = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
    if (ident) {
      out.emplace_back(name);
      p = close;
    }
  }
  return out;
}

void validate_pack(const TemplatePack& pack) {
  for (const char* k : {"start_year", "end_year", "month", "city", "block", "project"}) {
    if (!pack.field_mapping.count(k)) bad_pack(std::string("field mapping lacks ") + k);
  }
  for (const auto& [k, m] : pack.field_mapping) {
    if (!is_schema_field(m.source_column)) bad_pack("field mapping " + k + " names unknown column");
    if (m.derivation != "direct" && m.derivation != "year-of-date" && m.derivation != "month-of-date") {
      bad_pack("field mapping " + k + " has unknown derivation");
    }
  }
  for (const auto& [name, values] : parameter_candidates()) {
    auto it = pack.parameter_candidates.find(name);
    if (it == pack.parameter_candidates.end() || it->second != values) {
      bad_pack("parameter candidates for " + name + " differ from the function registry");
    }
  }
  for (const char* m : {"supply volume", "trade volume", "area range counts", "price range counts",
                        "total supply area", "total trade area", "avg price", "unit price", "area_range",
                        "price_range"}) {
    auto it = pack.header_aliases.find(m);
    if (it == pack.header_aliases.end() || it->second.empty()) bad_pack(std::string("header aliases lack ") + m);
  }
  std::set<int> theme_ids;
  for (const auto& t : pack.themes) {
    if (!theme_ids.insert(t.id).second) bad_pack("duplicate theme " + std::to_string(t.id));
    for (const auto& f : t.functions) {
      if (!is_function_id(f)) bad_pack("theme " + std::to_string(t.id) + " names unknown function " + f);
    }
    if (pack.titles(t.id).empty()) bad_pack("theme " + std::to_string(t.id) + " has no title template");
  }
  std::set<int> sub_ids;
  for (const auto& s : pack.subtemplates) {
    if (!sub_ids.insert(s.id).second) bad_pack("duplicate subtemplate " + std::to_string(s.id));
    if (!theme_ids.count(s.theme_id)) bad_pack("subtemplate " + std::to_string(s.id) + " has unknown theme");
    int titles = 0, captions = 0, bodies = 0, summaries = 0;
    for (const auto& slot : s.slots) {
      const Rect& r = slot.layout;
      if (r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0 || r.x + r.width > kCanvasWidth ||
          r.y + r.height > kCanvasHeight) {
        bad_pack("subtemplate " + std::to_string(s.id) + " has a slot outside the canvas");
      }
      titles += slot.role == Role::title;
      captions += slot.role == Role::caption;
      bodies += slot.role == Role::table_body || slot.role == Role::chart_body;
      summaries += slot.role == Role::summary;
      if (slot.role == Role::chart_body && !slot.chart_type) {
        bad_pack("chart slot without chart_type in subtemplate " + std::to_string(s.id));
      }
    }
    if (titles != 1 || captions < 1 || bodies < 1 || summaries != 1) {
      bad_pack("subtemplate " + std::to_string(s.id) + " lacks a title/caption/body/summary");
    }
  }
  std::set<std::string> metric_names;
  for (const auto& f : function_registry()) metric_names.insert(f.summary_metrics.begin(), f.summary_metrics.end());
  std::set<std::string> ids;
  for (const auto& t : pack.templates) {
    if (!ids.insert(t.id).second) bad_pack("duplicate template id " + t.id);
    if ((t.kind == TemplateKind::caption || t.kind == TemplateKind::summary) &&
        (!t.function_id || !is_function_id(*t.function_id))) {
      bad_pack("template " + t.id + " lacks a valid function_id");
    }
    if (t.kind == TemplateKind::title && (!t.theme_id || !theme_ids.count(*t.theme_id))) {
      bad_pack("title template " + t.id + " lacks a valid theme_id");
    }
    if (t.kind == TemplateKind::instruction &&
        (!t.scenario || (*t.scenario != "basic" && *t.scenario != "customized"))) {
      bad_pack("instruction template " + t.id + " is not tagged basic or customized");
    }
    for (const auto& p : placeholders(t.body)) {
      const bool ok = pack.field_mapping.count(p) || pack.parameter_candidates.count(p) ||
                      p == kMarketPlaceholder || (t.kind == TemplateKind::summary && metric_names.count(p));
      if (!ok) bad_pack("template " + t.id + " has unresolvable placeholder {" + p + "}");
    }
  }
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> resolve_variables(const TemplatePack& pack,
                                                     const std::vector<std::string>& template_vars,
                                                     const std::map<std::string, std::string>& bindings) {
  std::map<std::string, std::string> out;
  for (const auto& var : template_vars) {
    auto m = pack.field_mapping.find(var);
    if (m == pack.field_mapping.end()) throw Error(ErrorKind::UnknownVariable, var);
    auto b = bindings.find(var);
    if (b == bindings.end()) throw Error(ErrorKind::UnboundVariable, var);
    const std::string& v = b->second;
    if (m->second.derivation == "year-of-date") {
      // Dates and "YYYY-MM" months reduce to their year; a bare year passes through.
      out[var] = v.size() == 10 ? std::to_string(static_cast<int>(parse_date(v).year())) : v.substr(0, 4);
    } else if (m->second.derivation == "month-of-date") {
      out[var] = v.size() == 10 ? format_month(month_ordinal(parse_date(v))) : v;
    } else {
      out[var] = v;
    }
  }
  return out;
}

std::map<std::string, double> sample_parameters(const TemplatePack& pack, std::string_view function_id, Rng& rng) {
  const FunctionInfo& f = function_info(function_id);
  std::map<std::string, double> out;
  for (const auto& p : f.params) out[p] = pick(pack.parameter_candidates.at(p), rng);
  return out;
}

std::string select_header_alias(const TemplatePack& pack, std::string_view metric, Rng& rng) {
  auto it = pack.header_aliases.find(std::string(metric));
  if (it == pack.header_aliases.end() || it->second.empty()) throw Error(ErrorKind::UnknownMetric, std::string(metric));
  return pick(it->second, rng);
}

std::string instantiate_text(std::string_view body, const std::map<std::string, std::string>& resolved) {
  std::string out;
  for (std::size_t p = 0; p < body.size();) {
    if (body[p] == '{') {
      const auto close = body.find('}', p + 1);
      if (close != std::string_view::npos) {
        const std::string name(body.substr(p + 1, close - p - 1));
        const bool ident = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
          return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
        });
        if (ident) {
          auto it = resolved.find(name);
          if (it == resolved.end()) throw Error(ErrorKind::UnboundPlaceholder, name);
          out += it->second;
          p = close + 1;
          continue;
        }
      }
    }
    out += body[p++];
  }
  return out;
}

std::string instantiate_text(const TextTemplate& t, const std::map<std::string, std::string>& resolved) {
  return instantiate_text(t.body, resolved);
}

void validate_filters(const TemplatePack& pack, const FilterSet& f) {
  for (const auto& [k, v] : f.variables) {
    if (!pack.field_mapping.count(k)) throw Error(ErrorKind::UnknownVariable, k);
  }
  for (const auto& [k, v] : f.params) {
    auto it = pack.parameter_candidates.find(k);
    if (it == pack.parameter_candidates.end()) throw Error(ErrorKind::InvalidParam, "unknown parameter " + k);
    if (std::find(it->second.begin(), it->second.end(), v) == it->second.end()) {
      throw Error(ErrorKind::InvalidParam, k + "=" + format_number(v) + " is not a candidate value");
    }
  }
  if (f.function_id && !is_function_id(*f.function_id)) throw Error(ErrorKind::UnknownFunction, *f.function_id);
}

}  // namespace dynaslide
