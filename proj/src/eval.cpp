#include "dynaslide/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

#include "dynaslide/bench.hpp"
#include "dynaslide/digest.hpp"
#include "dynaslide/templates.hpp"

namespace dynaslide {

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

namespace {

bool cells_equal(const Cell& a, const Cell& b) {
  if (!a || !b) return !a && !b;
  return canonical_round(*a, RoundKind::price) == canonical_round(*b, RoundKind::price);
}

bool headers_equal(const std::vector<std::string>& a, const std::vector<std::string>& ac,
                   const std::vector<std::string>& b, const std::vector<std::string>& bc) {
  if (!ac.empty() && !bc.empty()) return ac == bc;
  return a == b;
}

bool tables_equal(const AnalyticalTable& p, const AnalyticalTable& g) {
  if (p.structure != g.structure || p.rows() != g.rows() || p.cols() != g.cols()) return false;
  const bool index_ok = (!p.index_canon.empty() && !g.index_canon.empty()) ? p.index_canon == g.index_canon
                                                                         : p.index_header == g.index_header;
  if (!index_ok) return false;
  if (!headers_equal(p.row_headers, p.row_canon, g.row_headers, g.row_canon)) return false;
  if (!headers_equal(p.col_headers, p.col_canon, g.col_headers, g.col_canon)) return false;
  if (p.cells.size() != g.cells.size()) return false;
  for (std::size_t i = 0; i < p.cells.size(); ++i) {
    if (p.cells[i].size() != g.cells[i].size()) return false;
    for (std::size_t j = 0; j < p.cells[i].size(); ++j) {
      if (!cells_equal(p.cells[i][j], g.cells[i][j])) return false;
    }
  }
  return true;
}

bool charts_equal(const ChartSpec& p, const ChartSpec& g) {
  if (p.chart_type != g.chart_type || p.categories != g.categories || p.series.size() != g.series.size()) {
    return false;
  }
  for (std::size_t s = 0; s < p.series.size(); ++s) {
    if (p.series[s].name != g.series[s].name || p.series[s].values.size() != g.series[s].values.size()) return false;
    for (std::size_t i = 0; i < p.series[s].values.size(); ++i) {
      if (!cells_equal(p.series[s].values[i], g.series[s].values[i])) return false;
    }
  }
  return true;
}

bool element_equal(const SlideElement& p, const SlideElement& g) {
  if (p.type != g.type || p.role != g.role || !(p.layout == g.layout)) return false;
  if (normalize_whitespace(p.text) != normalize_whitespace(g.text)) return false;
  if (p.payload.index() != g.payload.index()) return false;
  if (const auto* t = std::get_if<AnalyticalTable>(&g.payload)) return tables_equal(std::get<AnalyticalTable>(p.payload), *t);
  if (const auto* c = std::get_if<ChartSpec>(&g.payload)) return charts_equal(std::get<ChartSpec>(p.payload), *c);
  return true;
}

std::string_view group_of(Role r) {
  switch (r) {
    case Role::title:
    case Role::caption: return "Title";
    case Role::table_body: return "Table";
    case Role::chart_body: return "Chart";
    case Role::summary: return "Summary";
    case Role::unlabeled: return "";
  }
  return "";
}

}  // namespace

bool slide_exact_match(const SlideDocument& pred, const SlideDocument& gold) {
  if (pred.elements.size() != gold.elements.size()) return false;
  for (std::size_t i = 0; i < gold.elements.size(); ++i) {
    if (!element_equal(pred.elements[i], gold.elements[i])) return false;
  }
  return true;
}

std::map<std::string, bool> element_matches(const std::optional<SlideDocument>& pred, const SlideDocument& gold) {
  std::map<std::string, bool> out;
  for (auto g : kElementGroups) out[std::string(g)] = true;
  const bool aligned = pred && pred->elements.size() == gold.elements.size();
  for (std::size_t i = 0; i < gold.elements.size(); ++i) {
    const auto group = group_of(gold.elements[i].role);
    if (group.empty()) continue;
    if (!aligned || !element_equal(pred->elements[i], gold.elements[i])) out[std::string(group)] = false;
  }
  return out;
}

std::map<std::string, double> element_accuracy(const std::vector<std::optional<SlideDocument>>& preds,
                                               const std::vector<SlideDocument>& golds) {
  if (preds.size() != golds.size()) {
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(preds.size()) + " predictions for " + std::to_string(golds.size()) + " gold slides");
  }
  std::map<std::string, double> acc;
  for (auto g : kElementGroups) acc[std::string(g)] = 0.0;
  if (golds.empty()) return acc;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    for (const auto& [g, ok] : element_matches(preds[i], golds[i])) acc[g] += ok ? 1.0 : 0.0;
  }
  for (auto& [g, v] : acc) v /= static_cast<double>(golds.size());
  return acc;
}

// ---------------------------------------------------------------------------
// Modules

GoldIntermediates gold_intermediates(const SlideMetadata& meta, const SlideDocument& gold_target, LogicMode mode,
                                     const Store& store) {
  if (!meta.update_filters) throw Error(ErrorKind::MissingKey, "update_filters");
  GoldIntermediates g;
  Json roles = Json::array();
  for (const auto& s : meta.template_slide) roles.push_back(to_string(s.role));
  g.layout = {{"roles", roles}};
  const ParameterState src = state_from_filters(meta.slide_filters, LogicMode::closed);
  g.data_source = {{"table_name", src.table_name}, {"slots", to_json(src.slots)}};
  g.logic = to_json(state_from_filters(meta.slide_filters, mode).logic);
  const ParameterState upd = state_from_filters(*meta.update_filters, mode);
  g.instruction = to_json(upd);
  g.sql = compile_sql(upd, store);
  const Computation c = compute_for_filters(store, *meta.update_filters, meta.header_aliases);
  g.table = to_json(c.raw);
  g.metrics = c.metrics;
  for (const auto& e : gold_target.elements) {
    if (e.role == Role::summary) g.summary = e.text;
  }
  return g;
}

namespace {

bool same_result(const Json& output, const CompiledSql& gold, const Store& store) {
  try {
    CompiledSql pred;
    pred.text = output.at("sql").get<std::string>();
    for (const auto& p : output.at("params")) {
      if (p.is_string()) {
        pred.params.emplace_back(p.get<std::string>());
      } else {
        pred.params.emplace_back(p.get<double>());
      }
    }
    const QueryResult a = store.execute(parse_sql(pred.text, pred.params));
    const QueryResult b = store.execute(parse_sql(gold.text, gold.params));
    // Rows come back in one canonical order, so multiset equality is sequence
    // equality once the projections agree as sets.
    auto pa = a.projection, pb = b.projection;
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    if (pa != pb) return false;
    std::vector<std::string> ra, rb;
    for (const auto& r : a.rows) ra.push_back(canonical_dump(to_json(project_record(r, pa))));
    for (const auto& r : b.rows) rb.push_back(canonical_dump(to_json(project_record(r, pb))));
    std::sort(ra.begin(), ra.end());
    std::sort(rb.begin(), rb.end());
    return ra == rb;
  } catch (const std::exception&) {
    return false;
  }
}

bool same_digest(const StageTrace& t, const Json& gold) {
  const std::string want = sha256_hex(canonical_dump(gold));
  return t.ok && t.output_digest == want && sha256_hex(canonical_dump(t.output)) == want;
}

}  // namespace

std::map<std::string, bool> module_matches(const std::vector<StageTrace>& traces, const GoldIntermediates& gold,
                                           const Store& store) {
  if (traces.size() != kStages.size()) {
    throw Error(ErrorKind::IncompleteTrace, std::to_string(traces.size()) + " stage traces, expected 7");
  }
  for (std::size_t i = 0; i < kStages.size(); ++i) {
    if (traces[i].stage != kStages[i]) throw Error(ErrorKind::IncompleteTrace, "stage " + std::to_string(i + 1));
  }
  std::map<std::string, bool> m;
  m["Layout"] = same_digest(traces[0], gold.layout);
  m["Data Src."] = same_digest(traces[1], gold.data_source);
  m["Func. Logic"] = same_digest(traces[2], gold.logic);
  m["Instr. Parse"] = same_digest(traces[3], gold.instruction);
  m["SQL Gen."] = traces[4].ok && same_result(traces[4].output, gold.sql, store);
  m["Tool Inv."] = same_digest(traces[5], gold.table);
  m["Sum. Upd."] = traces[6].ok && traces[6].output.contains("text") && traces[6].output["text"].is_string() &&
                   normalize_whitespace(traces[6].output["text"].get<std::string>()) ==
                       normalize_whitespace(gold.summary);
  return m;
}

std::map<std::string, double> module_accuracy(const std::vector<std::vector<StageTrace>>& traces,
                                              const std::vector<SlideMetadata>& gold_metadata,
                                              const std::vector<SlideDocument>& gold_targets, LogicMode mode,
                                              const Store& store) {
  if (traces.size() != gold_metadata.size() || traces.size() != gold_targets.size()) {
    throw Error(ErrorKind::LengthMismatch, "trace sets and gold cases differ in number");
  }
  std::map<std::string, double> acc;
  for (auto m : kModules) acc[std::string(m)] = 0.0;
  if (traces.empty()) return acc;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto gold = gold_intermediates(gold_metadata[i], gold_targets[i], mode, store);
    for (const auto& [m, ok] : module_matches(traces[i], gold, store)) {
      if (acc.count(m)) acc[m] += ok ? 1.0 : 0.0;
    }
  }
  for (auto& [m, v] : acc) v /= static_cast<double>(traces.size());
  return acc;
}

CaseScore score_case(const EvalCase& c, const Store& store) {
  CaseScore s;
  s.id = c.id;
  s.theme_id = c.theme_id;
  s.scenario = c.scenario;
  s.mode = c.mode;
  s.exact = c.pred && slide_exact_match(*c.pred, c.gold);
  s.elements = element_matches(c.pred, c.gold);
  const auto gold = gold_intermediates(c.gold_meta, c.gold, c.mode, store);
  s.modules = module_matches(c.traces, gold, store);
  if (c.pred) {
    std::string summary;
    for (const auto& e : c.pred->elements) {
      if (e.role == Role::summary) summary = e.text;
    }
    // Only the metrics the gold summary template actually mentions count.
    std::set<std::string> mentioned;
    for (const auto& slot : c.gold_meta.template_slide) {
      if (slot.role != Role::summary || slot.template_id.empty()) continue;
      for (auto& p : placeholders(default_pack().text_template(slot.template_id).body)) mentioned.insert(p);
    }
    bool all = true;
    for (const auto& [k, v] : gold.metrics) {
      if (mentioned.count(k)) all = all && summary.find(v.render()) != std::string::npos;
    }
    s.summary_facts = all;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Report

namespace {

struct Tally {
  std::size_t n = 0;
  std::size_t hits = 0;
  void add(bool ok) {
    ++n;
    hits += ok ? 1 : 0;
  }
  double pct() const { return n == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(n); }
};

std::string pct_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

Report report(const std::vector<CaseScore>& scores) {
  const std::array<LogicMode, 2> modes = {LogicMode::closed, LogicMode::open};
  std::map<int, std::map<std::string, Tally>> by_theme;
  std::map<std::string, Tally> sr, facts;
  std::map<std::string, std::map<std::string, Tally>> elements, modules;
  std::map<std::string, std::map<std::string, Tally>> by_scenario;
  for (const auto& s : scores) {
    const std::string mode(to_string(s.mode));
    by_theme[s.theme_id][mode].add(s.exact);
    sr[mode].add(s.exact);
    by_scenario[s.scenario][mode].add(s.exact);
    for (const auto& [g, ok] : s.elements) elements[mode][g].add(ok);
    for (const auto& [m, ok] : s.modules) modules[mode][m].add(ok);
    if (s.summary_facts) facts[mode].add(*s.summary_facts);
  }

  Json j;
  j["format_version"] = kFormatVersion;
  j["cases"] = scores.size();
  Json themes = Json::object();
  for (const auto& [theme, per_mode] : by_theme) {
    Json row = Json::object();
    for (auto m : modes) {
      const std::string mode(to_string(m));
      auto it = per_mode.find(mode);
      if (it != per_mode.end()) row[mode] = {{"success_rate", it->second.pct()}, {"cases", it->second.n}};
    }
    themes[std::to_string(theme)] = row;
  }
  j["task_success"]["by_theme"] = themes;
  for (auto m : modes) {
    const std::string mode(to_string(m));
    j["task_success"]["overall"][mode] = {{"success_rate", sr[mode].pct()}, {"cases", sr[mode].n}};
    Json el = Json::object(), mo = Json::object();
    for (auto g : kElementGroups) el[std::string(g)] = elements[mode][std::string(g)].pct();
    for (auto md : kModules) mo[std::string(md)] = modules[mode][std::string(md)].pct();
    j["element_accuracy"][mode] = el;
    j["module_accuracy"][mode] = mo;
    j["layout_accuracy"][mode] = modules[mode]["Layout"].pct();
    j["secondary"]["summary_numeric_facts"][mode] = facts[mode].pct();
  }
  Json scen = Json::object();
  for (const auto& [name, per_mode] : by_scenario) {
    for (const auto& [mode, t] : per_mode) scen[name][mode] = {{"success_rate", t.pct()}, {"cases", t.n}};
  }
  j["task_success"]["by_scenario"] = scen;

  std::string text;
  text += "Task success rate (%) by theme\n";
  text += "theme   closed   open\n";
  for (const auto& [theme, per_mode] : by_theme) {
    char line[96];
    auto cell = [&](const char* mode) {
      auto it = per_mode.find(mode);
      return it == per_mode.end() ? std::string("-") : pct_text(it->second.pct());
    };
    std::snprintf(line, sizeof line, "%-7d %-8s %s\n", theme, cell("closed").c_str(), cell("open").c_str());
    text += line;
  }
  auto avg = [&](const char* m) { return sr[m].n == 0 ? std::string("-") : pct_text(sr[m].pct()); };
  text += "average " + avg("closed") + "   " + avg("open") + "\n";
  text += "cases   " + std::to_string(sr["closed"].n) + "   " + std::to_string(sr["open"].n) + "\n\n";
  for (auto m : modes) {
    const std::string mode(to_string(m));
    if (sr[mode].n == 0) continue;
    text += "Element accuracy (%), " + mode + ":";
    for (auto g : kElementGroups) text += " " + std::string(g) + "=" + pct_text(elements[mode][std::string(g)].pct());
    text += "\nModule accuracy (%), " + mode + ":";
    for (auto md : kModules) text += " " + std::string(md) + "=" + pct_text(modules[mode][std::string(md)].pct());
    text += "\nLayout parsing (%), " + mode + ": " + pct_text(modules[mode]["Layout"].pct());
    text += "\nSecondary, summary numeric facts (%), " + mode + ": " + pct_text(facts[mode].pct()) + "\n";
  }
  return {j, text};
}

}  // namespace dynaslide
