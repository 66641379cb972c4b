#include "dynaslide/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>

#include "dynaslide/parallel.hpp"

namespace dynaslide {

namespace fs = std::filesystem;

Computation compute_for_filters(const Store& store, const FilterSet& filters,
                                const std::map<std::string, std::string>& aliases) {
  Computation c;
  c.state = state_from_filters(filters, LogicMode::closed);
  const auto& call = std::get<ClosedCall>(c.state.logic);
  const FunctionInfo& info = function_info(call.function_id);
  const QueryResult rows = store.execute(query_for_state(c.state));
  c.raw = run_statistical_function(info.id, rows.rows, {call.params, *c.state.slots.date_code});
  c.labeled = label_table(c.raw, info, aliases);
  c.metrics = extract_summary_metrics(c.raw, info.id);
  return c;
}

std::map<std::string, Content> slide_contents(const TemplatePack& pack, const SlideDocument& skeleton,
                                              const SlideMetadata& metadata, const Computation& c) {
  if (metadata.template_slide.size() != skeleton.elements.size()) {
    throw Error(ErrorKind::LengthMismatch, "template_slide does not describe every element");
  }
  auto values = text_values(pack, c.state);
  add_metric_values(values, c.metrics);
  std::map<std::string, Content> out;
  for (std::size_t i = 0; i < skeleton.elements.size(); ++i) {
    const SlideElement& e = skeleton.elements[i];
    const TemplateSlot& slot = metadata.template_slide[i];
    if (slot.role != e.role) throw Error(ErrorKind::RoleMismatch, e.id);
    switch (e.role) {
      case Role::table_body:
        out[e.id] = c.labeled;
        break;
      case Role::chart_body:
        out[e.id] = chart_from_table(c.labeled, slot.chart_type.value_or(ChartType::bar));
        break;
      case Role::unlabeled:
        break;
      default:
        out[e.id] = instantiate_text(pack.text_template(slot.template_id), values);
    }
  }
  return out;
}

namespace {

std::vector<const TextTemplate*> bindable(const std::vector<const TextTemplate*>& candidates,
                                          const std::map<std::string, std::string>& values) {
  std::vector<const TextTemplate*> out;
  for (const auto* t : candidates) {
    if (template_bindable(t->body, values)) out.push_back(t);
  }
  return out;
}

std::vector<std::string> tables_of_market(const Store& store, const std::optional<std::string>& market) {
  std::vector<std::string> out;
  for (const auto& t : store.table_names()) {
    if (!market || split_table_name(t).first == *market) out.push_back(t);
  }
  return out;
}

using Period2 = std::pair<std::string, std::string>;

// Year pairs with start < end, or monthly windows of 12-18 months starting
// after January (so the start and end years always differ).
std::vector<Period2> period_choices(Period p) {
  const DateWindow w = default_window();
  std::vector<Period2> out;
  if (p == Period::yearly) {
    const int y0 = static_cast<int>(w.first.year()), y1 = static_cast<int>(w.last.year());
    for (int a = y0; a <= y1; ++a) {
      for (int b = a + 1; b <= y1; ++b) out.emplace_back(std::to_string(a), std::to_string(b));
    }
  } else {
    const int m0 = month_ordinal(w.first), m1 = month_ordinal(w.last);
    for (int s = m0; s <= m1; ++s) {
      if (s % 12 == 0) continue;
      for (int len = 12; len <= 18; ++len) {
        if (s + len - 1 <= m1) out.emplace_back(format_month(s), format_month(s + len - 1));
      }
    }
  }
  return out;
}

std::pair<std::string, std::string> period_keys(Period p) {
  return p == Period::yearly ? std::pair<std::string, std::string>{"start_year", "end_year"}
                             : std::pair<std::string, std::string>{"start_month", "end_month"};
}

SlideDocument fill_slide(SlideDocument s, const std::map<std::string, Content>& contents,
                         const SlideMetadata& metadata) {
  for (std::size_t i = 0; i < s.elements.size(); ++i) {
    auto it = contents.find(s.elements[i].id);
    if (it == contents.end()) continue;
    const Content& c = it->second;
    switch (s.elements[i].role) {
      case Role::title:
        s = add_title(std::move(s), std::get<std::string>(c), i);
        break;
      case Role::caption:
      case Role::summary:
        s = add_text(std::move(s), std::get<std::string>(c), i);
        break;
      case Role::table_body:
        s = add_table(std::move(s), std::get<AnalyticalTable>(c), i);
        break;
      case Role::chart_body:
        if (metadata.template_slide[i].chart_type.value_or(ChartType::bar) == ChartType::line) {
          s = add_line_chart(std::move(s), std::get<ChartSpec>(c), i);
        } else {
          s = add_bar_chart(std::move(s), std::get<ChartSpec>(c), i);
        }
        break;
      case Role::unlabeled:
        break;
    }
  }
  return s;
}

}  // namespace

GeneratedSlide generate_source_slide(const TemplatePack& pack, const Store& store, int theme_id, int subtemplate_id,
                                     Rng& rng, const std::vector<std::string>& functions) {
  const Theme& theme = pack.theme(theme_id);
  SlideDocument skeleton = create_slide(pack, theme_id, subtemplate_id);

  std::vector<std::string> candidates;
  for (const auto& f : theme.functions) {
    if (functions.empty() || std::find(functions.begin(), functions.end(), f) != functions.end()) {
      candidates.push_back(f);
    }
  }
  if (candidates.empty()) {
    throw Error(ErrorKind::NoApplicableTemplate, "theme " + std::to_string(theme_id) + " offers none of the functions");
  }
  const FunctionInfo& info = function_info(pick(candidates, rng));

  const auto tables = tables_of_market(store, theme.market);
  if (tables.empty()) throw Error(ErrorKind::UnknownTable, "no table for the theme's market");
  const std::string table = pick(tables, rng);
  const std::string city = pick(store.cities(table), rng);

  FilterSet f;
  f.table_name = table;
  f.function_id = info.id;
  f.variables["city"] = city;
  if (info.scope == Scope::block) f.variables["block"] = pick(store.blocks(table, city), rng);
  const auto [start_key, end_key] = period_keys(info.period);
  const auto period = pick(period_choices(info.period), rng);
  f.variables[start_key] = period.first;
  f.variables[end_key] = period.second;
  f.params = sample_parameters(pack, info.id, rng);

  SlideMetadata meta;
  meta.slide_filters = f;
  for (const auto& canon : info.metric_canon) meta.header_aliases[canon] = select_header_alias(pack, canon, rng);
  if (!info.index_canon.empty()) meta.header_aliases[info.index_canon] = select_header_alias(pack, info.index_canon, rng);

  const Computation c = compute_for_filters(store, f, meta.header_aliases);
  auto values = text_values(pack, c.state);
  add_metric_values(values, c.metrics);

  const Subtemplate& sub = pack.subtemplate(subtemplate_id);
  for (const auto& slot : sub.slots) {
    TemplateSlot ts = slot;
    std::vector<const TextTemplate*> options;
    if (slot.role == Role::title) options = bindable(pack.titles(theme_id), values);
    if (slot.role == Role::caption) options = bindable(pack.for_function(TemplateKind::caption, info.id), values);
    if (slot.role == Role::summary) options = bindable(pack.for_function(TemplateKind::summary, info.id), values);
    if (slot.role == Role::title || slot.role == Role::caption || slot.role == Role::summary) {
      if (options.empty()) {
        throw Error(ErrorKind::NoApplicableTemplate,
                    std::string(to_string(slot.role)) + " template for " + info.id + " in theme " +
                        std::to_string(theme_id));
      }
      ts.template_id = pick(options, rng)->id;
    }
    meta.template_slide.push_back(ts);
  }

  GeneratedSlide out;
  out.slide = fill_slide(skeleton, slide_contents(pack, skeleton, meta, c), meta);
  out.metadata = std::move(meta);
  validate_slide(out.slide);
  return out;
}

Instruction generate_instruction(const TemplatePack& pack, const Store& store, const SlideMetadata& metadata,
                                 std::string_view scenario, Rng& rng) {
  if (scenario != "basic" && scenario != "customized") {
    throw Error(ErrorKind::InvalidConfig, "scenario must be basic or customized");
  }
  const FilterSet& current = metadata.slide_filters;
  if (!current.function_id || !current.table_name) throw Error(ErrorKind::MissingKey, "slide_filters");
  const FunctionInfo& info = function_info(*current.function_id);
  const auto vars = function_variables(info);
  const std::string market = split_table_name(*current.table_name).first;

  std::vector<std::string> other_tables;
  for (const auto& t : tables_of_market(store, market)) {
    if (t != *current.table_name) other_tables.push_back(t);
  }
  const std::string cur_city = current.variables.count("city") ? current.variables.at("city") : "";
  const std::string cur_block = current.variables.count("block") ? current.variables.at("block") : "";
  const bool can_change_block = info.scope == Scope::block && store.has_table(*current.table_name) &&
                                store.blocks(*current.table_name, cur_city).size() > 1;

  std::vector<const TextTemplate*> options;
  for (const auto* t : pack.instructions(scenario)) {
    const auto names = placeholders(t->body);
    bool ok = !names.empty();
    bool has_city = false, has_block = false, has_param = false;
    for (const auto& n : names) {
      const bool is_var = std::find(vars.begin(), vars.end(), n) != vars.end();
      const bool is_param = std::find(info.params.begin(), info.params.end(), n) != info.params.end();
      ok = ok && (is_var || (scenario == "customized" && is_param));
      has_city = has_city || n == "city";
      has_block = has_block || n == "block";
      has_param = has_param || is_param;
    }
    // A new city invalidates the block, so block-scope functions move both.
    if (has_city && info.scope == Scope::block && !has_block) ok = false;
    if (has_city && other_tables.empty()) ok = false;
    if (has_block && !has_city && !can_change_block) ok = false;
    if (scenario == "customized" && !has_param) ok = false;
    if (ok) options.push_back(t);
  }
  if (options.empty()) {
    throw Error(ErrorKind::NoApplicableTemplate, std::string(scenario) + " instruction for " + info.id);
  }
  const TextTemplate& chosen = *pick(options, rng);
  const auto names = placeholders(chosen.body);
  auto mentions = [&](std::string_view n) { return std::find(names.begin(), names.end(), n) != names.end(); };

  Instruction out;
  out.scenario = std::string(scenario);
  out.template_id = chosen.id;
  FilterSet& q = out.query_filters;
  std::string table = *current.table_name;
  std::string city = cur_city;
  if (mentions("city")) {
    table = pick(other_tables, rng);
    city = pick(store.cities(table), rng);
    q.table_name = table;
    q.variables["city"] = city;
  }
  if (mentions("block")) {
    std::vector<std::string> blocks;
    for (const auto& b : store.blocks(table, city)) {
      if (b != cur_block) blocks.push_back(b);
    }
    q.variables["block"] = pick(blocks, rng);
  }
  const auto [start_key, end_key] = period_keys(info.period);
  if (mentions(start_key) || mentions(end_key)) {
    std::vector<Period2> periods;
    const Period2 now{current.variables.count(start_key) ? current.variables.at(start_key) : "",
                      current.variables.count(end_key) ? current.variables.at(end_key) : ""};
    for (const auto& p : period_choices(info.period)) {
      if (p != now) periods.push_back(p);
    }
    const auto p = pick(periods, rng);
    q.variables[start_key] = p.first;
    q.variables[end_key] = p.second;
  }
  std::map<std::string, std::string> text_vals = q.variables;
  for (const auto& p : info.params) {
    if (!mentions(p)) continue;
    std::vector<double> values;
    const double now = current.params.count(p) ? current.params.at(p) : std::nan("");
    for (double v : pack.parameter_candidates.at(p)) {
      if (v != now) values.push_back(v);
    }
    q.params[p] = pick(values, rng);
    text_vals[p] = format_number(q.params[p]);
  }
  out.text = instantiate_text(chosen, text_vals);
  return out;
}

FilterSet merge_filters(const FilterSet& slide_filters, const FilterSet& query_filters, const Store* store) {
  FilterSet out = slide_filters;
  if (query_filters.table_name && query_filters.table_name != slide_filters.table_name) {
    const std::string& to = *query_filters.table_name;
    if (slide_filters.table_name) {
      const auto from_market = split_table_name(*slide_filters.table_name).first;
      if (split_table_name(to).first != from_market) {
        throw Error(ErrorKind::ConflictingTable, to + " is outside market " + from_market);
      }
    }
    if (store && !store->has_table(to)) throw Error(ErrorKind::ConflictingTable, to + " does not exist");
    out.table_name = to;
  }
  if (query_filters.function_id) out.function_id = query_filters.function_id;
  for (const auto& [k, v] : query_filters.variables) out.variables[k] = v;
  for (const auto& [k, v] : query_filters.params) out.params[k] = v;
  if (out.table_name && out.variables.count("city")) {
    const auto market = split_table_name(*out.table_name).first;
    if (make_table_name(market, out.variables.at("city")) != *out.table_name) {
      throw Error(ErrorKind::ConflictingTable, "city " + out.variables.at("city") + " is not in " + *out.table_name);
    }
  }
  return out;
}

GeneratedSlide generate_target_slide(const TemplatePack& pack, const Store& store, const SlideDocument& source,
                                     const SlideMetadata& metadata) {
  if (!metadata.update_filters) throw Error(ErrorKind::MissingKey, "update_filters");
  const Computation c = compute_for_filters(store, *metadata.update_filters, metadata.header_aliases);
  GeneratedSlide out;
  out.slide = repopulate(source, slide_contents(pack, source, metadata, c));
  out.metadata = metadata;
  return out;
}

// ---------------------------------------------------------------------------
// Splits

namespace {

struct Group {
  int subtemplate_id;
  std::size_t count;
};

using Assignment = std::vector<int>;  // group index -> split 0/1/2

std::array<std::size_t, 3> sizes_of(const std::vector<Group>& groups, const Assignment& a) {
  std::array<std::size_t, 3> s{0, 0, 0};
  for (std::size_t g = 0; g < groups.size(); ++g) s[static_cast<std::size_t>(a[g])] += groups[g].count;
  return s;
}

// Largest absolute deviation from the targets; empty splits are unusable.
double score(const std::vector<Group>& groups, const Assignment& a, const std::array<double, 3>& target) {
  const auto s = sizes_of(groups, a);
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    if (s[k] == 0) return INFINITY;
    worst = std::max(worst, std::abs(static_cast<double>(s[k]) - target[k]));
  }
  return worst;
}

Assignment greedy_split(const std::vector<Group>& groups, const std::array<double, 3>& target) {
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return groups[a].count > groups[b].count; });
  Assignment a(groups.size(), 0);
  std::array<double, 3> filled{0, 0, 0};
  for (std::size_t g : order) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (target[k] - filled[k] > target[best] - filled[best]) best = k;
    }
    a[g] = best;
    filled[best] += static_cast<double>(groups[g].count);
  }
  return a;
}

// Subset of the still-unassigned groups whose total is closest to target
// (never empty). Returns false when no group is free.
bool closest_subset(const std::vector<Group>& groups, Assignment& a, int from, int to, double target) {
  std::size_t total = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (a[g] == from) total += groups[g].count;
  }
  if (total == 0) return false;
  std::vector<char> reach(total + 1, 0);
  std::vector<int> who(total + 1, -1);
  reach[0] = 1;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (a[g] != from) continue;
    const std::size_t c = groups[g].count;
    for (std::size_t s = total; s >= c && s > 0; --s) {
      if (!reach[s] && reach[s - c]) {
        reach[s] = 1;
        who[s] = static_cast<int>(g);
      }
    }
  }
  std::size_t best = 0;
  double best_err = INFINITY;
  for (std::size_t s = 1; s <= total; ++s) {
    if (!reach[s]) continue;
    const double err = std::abs(static_cast<double>(s) - target);
    if (err < best_err) {
      best_err = err;
      best = s;
    }
  }
  for (std::size_t s = best; s > 0;) {
    const int g = who[s];
    a[static_cast<std::size_t>(g)] = to;
    s -= groups[static_cast<std::size_t>(g)].count;
  }
  return true;
}

Assignment dp_split(const std::vector<Group>& groups, const std::array<double, 3>& target) {
  Assignment a(groups.size(), 0);
  closest_subset(groups, a, 0, 2, target[2]);
  closest_subset(groups, a, 0, 1, target[1]);
  return a;
}

}  // namespace

Splits split_dataset(const std::vector<SplitItem>& items, const std::array<double, 3>& ratios) {
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9 ||
      std::any_of(ratios.begin(), ratios.end(), [](double r) { return r < 0.0; })) {
    throw Error(ErrorKind::InvalidConfig, "split ratios must be non-negative and sum to 1");
  }
  std::map<int, std::size_t> counts;
  for (const auto& it : items) ++counts[it.subtemplate_id];
  if (counts.size() < 3) {
    throw Error(ErrorKind::TooFewSubtemplates, std::to_string(counts.size()) + " sub-templates cannot fill 3 splits");
  }
  std::vector<Group> groups;
  for (const auto& [id, n] : counts) groups.push_back({id, n});
  const double n = static_cast<double>(items.size());
  const std::array<double, 3> target{n * ratios[0], n * ratios[1], n * ratios[2]};

  Assignment a = greedy_split(groups, target);
  const Assignment dp = dp_split(groups, target);
  if (score(groups, dp, target) < score(groups, a, target)) a = dp;

  std::map<int, int> split_of;
  for (std::size_t g = 0; g < groups.size(); ++g) split_of[groups[g].subtemplate_id] = a[g];
  Splits out;
  for (const auto& it : items) {
    switch (split_of.at(it.subtemplate_id)) {
      case 0: out.train.push_back(it.id); break;
      case 1: out.val.push_back(it.id); break;
      default: out.test.push_back(it.id); break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset

namespace {

struct SlidePlan {
  int subtemplate_id = 0;
  std::string function_id;
  std::vector<std::string> scenarios;
  std::uint64_t seed = 0;
  std::size_t first_triple = 0;
};

double unit_draw(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string numbered(char prefix, std::size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%05zu", prefix, n);
  return buf;
}

}  // namespace

Dataset build_dataset(const BenchConfig& cfg, const TemplatePack& pack, const Store& store) {
  if (cfg.min_instructions < 1 || cfg.max_instructions < cfg.min_instructions) {
    throw Error(ErrorKind::InvalidConfig, "instructions per slide must satisfy 1 <= min <= max");
  }
  std::vector<int> sub_ids;
  for (const auto& s : pack.subtemplates) sub_ids.push_back(s.id);
  std::sort(sub_ids.begin(), sub_ids.end());

  // Functions are drawn uniformly within the theme; only parameterised ones
  // can host customized instructions, so their per-instruction odds are
  // scaled up to keep the overall customized share at cfg.customized_share.
  auto has_params = [](const std::string& f) { return !function_info(f).params.empty(); };
  double param_fraction = 0.0;
  for (int id : sub_ids) {
    const auto& fns = pack.theme(pack.subtemplate(id).theme_id).functions;
    param_fraction += static_cast<double>(std::count_if(fns.begin(), fns.end(), has_params)) /
                      static_cast<double>(fns.size()) / static_cast<double>(sub_ids.size());
  }
  const double customized_odds = param_fraction > 0.0 ? std::min(1.0, cfg.customized_share / param_fraction) : 0.0;

  Rng plan_rng(cfg.seed);
  std::vector<SlidePlan> plans;
  std::vector<int> order;
  std::set<int> used;
  for (std::size_t total = 0; total < cfg.count;) {
    if (order.empty()) {
      order = sub_ids;
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[plan_rng() % i]);
    }
    SlidePlan p;
    p.subtemplate_id = order.back();
    order.pop_back();
    p.function_id = pick(pack.theme(pack.subtemplate(p.subtemplate_id).theme_id).functions, plan_rng);
    const auto span = static_cast<std::uint64_t>(cfg.max_instructions - cfg.min_instructions + 1);
    std::size_t k = static_cast<std::size_t>(cfg.min_instructions) + plan_rng() % span;
    k = std::min(k, cfg.count - total);
    for (std::size_t j = 0; j < k; ++j) {
      const bool customized = has_params(p.function_id) && unit_draw(plan_rng) < customized_odds;
      p.scenarios.push_back(customized ? "customized" : "basic");
    }
    p.seed = derive_seed(cfg.seed, plans.size());
    p.first_triple = total;
    total += k;
    used.insert(p.subtemplate_id);
    plans.push_back(std::move(p));
  }
  if (used.size() < 3) {
    throw Error(ErrorKind::InsufficientSubtemplates,
                std::to_string(cfg.count) + " triples cover only " + std::to_string(used.size()) + " sub-templates");
  }

  Dataset d;
  d.config = cfg;
  d.pack_version = pack.pack_version;
  d.triples.resize(cfg.count);
  parallel_for(plans.size(), cfg.jobs, [&](std::size_t i) {
    const SlidePlan& p = plans[i];
    Rng rng(p.seed);
    const Subtemplate& sub = pack.subtemplate(p.subtemplate_id);
    const GeneratedSlide src = generate_source_slide(pack, store, sub.theme_id, sub.id, rng, {p.function_id});
    for (std::size_t j = 0; j < p.scenarios.size(); ++j) {
      Triple& t = d.triples[p.first_triple + j];
      t.id = numbered('t', p.first_triple + j + 1);
      t.slide_id = numbered('s', i + 1);
      t.theme_id = sub.theme_id;
      t.subtemplate_id = sub.id;
      t.function_id = *src.metadata.slide_filters.function_id;
      t.scenario = p.scenarios[j];
      const Instruction ins = generate_instruction(pack, store, src.metadata, t.scenario, rng);
      t.instruction_template = ins.template_id;
      t.instruction = ins.text;
      t.source = src.slide;
      t.metadata = src.metadata;
      t.metadata.query_filters = ins.query_filters;
      t.metadata.update_filters = merge_filters(src.metadata.slide_filters, ins.query_filters, &store);
      t.metadata.output_slide = "slides/" + t.id + "_target.json";
      t.target = generate_target_slide(pack, store, t.source, t.metadata).slide;
    }
  });

  std::vector<SplitItem> items;
  for (const auto& t : d.triples) items.push_back({t.id, t.subtemplate_id});
  d.splits = split_dataset(items, cfg.ratios);
  std::map<std::string, std::string> split_of;
  for (const auto& id : d.splits.train) split_of[id] = "train";
  for (const auto& id : d.splits.val) split_of[id] = "val";
  for (const auto& id : d.splits.test) split_of[id] = "test";
  for (auto& t : d.triples) t.split = split_of.at(t.id);
  return d;
}

Json manifest_json(const Dataset& d) {
  Json m;
  m["format_version"] = kFormatVersion;
  m["pack_version"] = d.pack_version;
  m["seed"] = d.config.seed;
  m["count"] = d.triples.size();
  m["customized_share"] = d.config.customized_share;
  m["instructions_per_slide"] = {{"distribution", "uniform"},
                                 {"min", d.config.min_instructions},
                                 {"max", d.config.max_instructions}};
  m["ratios"] = d.config.ratios;
  m["splits"] = {{"train", d.splits.train}, {"val", d.splits.val}, {"test", d.splits.test}};
  std::map<std::string, std::size_t> by_theme, by_function, by_scenario, by_split;
  std::set<std::string> slides;
  Json triples = Json::array();
  for (const auto& t : d.triples) {
    ++by_theme[std::to_string(t.theme_id)];
    ++by_function[t.function_id];
    ++by_scenario[t.scenario];
    ++by_split[t.split];
    slides.insert(t.slide_id);
    triples.push_back({{"id", t.id},
                       {"slide_id", t.slide_id},
                       {"source", "slides/" + t.slide_id + ".json"},
                       {"target", *t.metadata.output_slide},
                       {"metadata", "metadata/" + t.id + ".json"},
                       {"instruction", t.instruction},
                       {"instruction_template", t.instruction_template},
                       {"theme_id", t.theme_id},
                       {"subtemplate_id", t.subtemplate_id},
                       {"function_id", t.function_id},
                       {"scenario", t.scenario},
                       {"split", t.split}});
  }
  m["counts"] = {{"source_slides", slides.size()},
                 {"by_theme", by_theme},
                 {"by_function", by_function},
                 {"by_scenario", by_scenario},
                 {"by_split", by_split}};
  m["triples"] = triples;
  return m;
}

namespace {

void write_slide(const fs::path& root, const std::string& stem, const SlideDocument& s) {
  write_text_file((root / "slides" / (stem + ".json")).string(), to_json(s).dump(2) + "\n");
  for (const auto& e : s.elements) {
    if (const auto* c = std::get_if<ChartSpec>(&e.payload)) {
      write_text_file((root / "charts" / (stem + "_" + e.id + ".svg")).string(), render_chart_svg(*c, e.layout));
    }
  }
}

}  // namespace

void write_dataset(const Dataset& d, const Store& store, const std::string& dir) {
  const fs::path root(dir);
  for (const char* sub : {"slides", "charts", "metadata"}) fs::create_directories(root / sub);
  std::set<std::string> written;
  for (const auto& t : d.triples) {
    if (written.insert(t.slide_id).second) write_slide(root, t.slide_id, t.source);
    write_slide(root, t.id + "_target", t.target);
    write_text_file((root / "metadata" / (t.id + ".json")).string(), to_json(t.metadata).dump(2) + "\n");
  }
  write_text_file((root / "corpus.ndjson").string(), to_ndjson(store.all_records()));
  write_text_file((root / "manifest.json").string(), manifest_json(d).dump(2) + "\n");
}

LoadedBench load_dataset(const std::string& dir) {
  const fs::path root(dir);
  LoadedBench b;
  b.manifest = read_json_file((root / "manifest.json").string());
  b.store = Store(from_ndjson(read_text_file((root / "corpus.ndjson").string())));
  try {
    for (const auto& e : b.manifest.at("triples")) {
      Triple t;
      t.id = e.at("id").get<std::string>();
      t.slide_id = e.at("slide_id").get<std::string>();
      t.theme_id = e.at("theme_id").get<int>();
      t.subtemplate_id = e.at("subtemplate_id").get<int>();
      t.function_id = e.at("function_id").get<std::string>();
      t.scenario = e.at("scenario").get<std::string>();
      t.instruction_template = e.at("instruction_template").get<std::string>();
      t.instruction = e.at("instruction").get<std::string>();
      t.split = e.at("split").get<std::string>();
      t.source = slide_from_json(read_json_file((root / e.at("source").get<std::string>()).string()));
      t.target = slide_from_json(read_json_file((root / e.at("target").get<std::string>()).string()));
      t.metadata = metadata_from_json(read_json_file((root / e.at("metadata").get<std::string>()).string()));
      b.triples.push_back(std::move(t));
    }
  } catch (const Json::exception& ex) {
    throw Error(ErrorKind::SchemaViolation, std::string("manifest: ") + ex.what());
  }
  return b;
}

}  // namespace dynaslide
