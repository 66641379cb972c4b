#include "dynaslide/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

namespace dynaslide {

// ---------------------------------------------------------------------------
// Fields

bool is_derived_field(std::string_view k) { return k == "year" || k == "month" || k == "price_m"; }

bool is_categorical_field(std::string_view k) {
  return k == "city" || k == "block" || k == "project" || k == "date_code";
}

std::string source_column(std::string_view k) {
  if (k == "year" || k == "month") return "date_code";
  if (k == "price_m") return "dim_price";
  if (!is_schema_field(k)) throw Error(ErrorKind::UnknownField, std::string(k));
  return std::string(k);
}

std::optional<double> numeric_value(const TransactionRecord& r, std::string_view k) {
  if (k == "supply_sets") return static_cast<double>(r.supply_sets);
  if (k == "trade_sets") return static_cast<double>(r.trade_sets);
  if (k == "dim_area") return r.dim_area;
  if (k == "dim_price") return r.dim_price;
  if (k == "dim_unit_price") return r.dim_unit_price;
  if (k == "year") return static_cast<double>(static_cast<int>(r.date_code.year()));
  if (k == "month") return static_cast<double>(month_ordinal(r.date_code));
  if (k == "price_m") return r.dim_price / 100.0;
  if (is_categorical_field(k)) return std::nullopt;
  throw Error(ErrorKind::UnknownField, std::string(k));
}

std::string key_text(const TransactionRecord& r, std::string_view k) {
  if (k == "city") return r.city;
  if (k == "block") return r.block;
  if (k == "project") return r.project;
  if (k == "date_code") return format_date(r.date_code);
  if (k == "year") return std::to_string(static_cast<int>(r.date_code.year()));
  if (k == "month") return format_month(month_ordinal(r.date_code));
  return format_number(*numeric_value(r, k));
}

// ---------------------------------------------------------------------------
// Binning

namespace {

double clean(double v) { return std::round(v * 1e9) / 1e9; }

bool is_constraint_key(std::string_view k) { return is_schema_field(k) || is_derived_field(k); }

}  // namespace

std::string format_bound(std::string_view field, double v) {
  if (field == "month") return format_month(static_cast<int>(std::lround(v)));
  return format_number(v);
}

std::vector<Bin> make_bins(std::string_view field, double start, double end, double step, std::string_view T) {
  if (!std::isfinite(start) || !std::isfinite(end) || !(start < end)) {
    throw Error(ErrorKind::InvalidBounds, "binning needs start < end on " + std::string(field));
  }
  if (!std::isfinite(step) || !(step > 0.0)) {
    throw Error(ErrorKind::InvalidBounds, "binning needs a positive step on " + std::string(field));
  }
  const double n = std::ceil((end - start) / step - 1e-9);
  if (n > 10000) throw Error(ErrorKind::InvalidBounds, "too many bins on " + std::string(field));
  std::vector<Bin> bins;
  for (int i = 0; i < static_cast<int>(n); ++i) {
    Bin b;
    b.lo = clean(start + i * step);
    b.hi = std::min(clean(start + (i + 1) * step), end);
    const std::string lo = format_bound(field, b.lo);
    const std::string hi = format_bound(field, b.hi);
    if (T.find("{}") == std::string_view::npos) {
      b.label = lo + std::string(T) + hi;
    } else {
      std::string label;
      int used = 0;
      for (std::size_t p = 0; p < T.size();) {
        if (T.compare(p, 2, "{}") == 0) {
          label += used++ == 0 ? lo : hi;
          p += 2;
        } else {
          label += T[p++];
        }
      }
      b.label = label;
    }
    bins.push_back(std::move(b));
  }
  return bins;
}

std::optional<std::size_t> bin_index(const std::vector<Bin>& bins, double v) {
  if (bins.empty() || v < bins.front().lo || v >= bins.back().hi) return std::nullopt;
  const double step = bins.front().hi - bins.front().lo;
  auto i = static_cast<std::ptrdiff_t>(std::floor((v - bins.front().lo) / step));
  i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(bins.size()) - 1);
  while (i > 0 && v < bins[static_cast<std::size_t>(i)].lo) --i;
  while (i + 1 < static_cast<std::ptrdiff_t>(bins.size()) && v >= bins[static_cast<std::size_t>(i)].hi) ++i;
  return static_cast<std::size_t>(i);
}

std::vector<Row> to_rows(const std::vector<TransactionRecord>& records) {
  std::vector<Row> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back({r, {}});
  return rows;
}

std::vector<Row> apply_binning(const std::vector<Row>& rows, std::string_view field, double start, double end,
                               double step, std::string_view T) {
  if (!is_constraint_key(field)) throw Error(ErrorKind::UnknownField, std::string(field));
  if (is_categorical_field(field)) throw Error(ErrorKind::InvalidBounds, "cannot bin " + std::string(field));
  const auto bins = make_bins(field, start, end, step, T);
  std::vector<Row> out;
  for (const auto& row : rows) {
    const auto idx = bin_index(bins, *numeric_value(row.record, field));
    if (!idx) continue;
    Row tagged = row;
    tagged.tags[std::string(field)] = bins[*idx].label;
    out.push_back(std::move(tagged));
  }
  return out;
}

namespace {

template <typename V>
bool compare(const V& a, std::string_view op, const V& b) {
  if (op == "=") return a == b;
  if (op == "!=") return a != b;
  if (op == "<") return a < b;
  if (op == "<=") return a <= b;
  if (op == ">") return a > b;
  return a >= b;
}

}  // namespace

std::vector<Row> apply_filter(const std::vector<Row>& rows, std::string_view k, std::string_view T,
                              const ConstraintValue& v) {
  if (!is_constraint_key(k)) throw Error(ErrorKind::UnknownField, std::string(k));
  static const std::set<std::string_view> kOps = {"=", "!=", "<", "<=", ">", ">="};
  if (!kOps.count(T)) throw Error(ErrorKind::UnknownOp, std::string(T));
  if (std::holds_alternative<std::monostate>(v)) {
    throw Error(ErrorKind::InvalidBounds, "filter on " + std::string(k) + " has no value");
  }
  std::vector<Row> out;
  if (is_categorical_field(k)) {
    const std::string want = std::holds_alternative<std::string>(v) ? std::get<std::string>(v)
                                                                     : format_number(std::get<double>(v));
    for (const auto& row : rows) {
      if (compare(key_text(row.record, k), T, want)) out.push_back(row);
    }
    return out;
  }
  const auto bound = constraint_bound(v, k);
  if (!bound) throw Error(ErrorKind::InvalidBounds, "non-numeric filter value on " + std::string(k));
  for (const auto& row : rows) {
    if (compare(*numeric_value(row.record, k), T, *bound)) out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Group / aggregate

std::string metric_label(std::string_view field, Aggregation op) {
  return std::string(to_string(op)) + "(" + std::string(field) + ")";
}

Grouped group_aggregate(const std::vector<Row>& rows, const std::vector<std::string>& keys,
                        const std::vector<std::string>& fields, const std::vector<Aggregation>& ops) {
  if (fields.size() != ops.size()) {
    throw Error(ErrorKind::MismatchedFieldOps,
                std::to_string(fields.size()) + " fields vs " + std::to_string(ops.size()) + " operations");
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (!is_schema_field(fields[i])) throw Error(ErrorKind::UnknownField, fields[i]);
    if (ops[i] != Aggregation::COUNT && is_categorical_field(fields[i])) {
      throw Error(ErrorKind::UnknownField, "cannot aggregate " + fields[i] + " numerically");
    }
  }
  for (const auto& k : keys) {
    if (!is_constraint_key(k)) throw Error(ErrorKind::UnknownField, k);
  }
  Grouped g;
  g.keys = keys;
  g.ops = ops;
  for (std::size_t i = 0; i < fields.size(); ++i) g.metric_labels.push_back(metric_label(fields[i], ops[i]));

  struct Acc {
    std::vector<double> sums;
    std::size_t count = 0;
  };
  std::map<std::vector<std::string>, std::size_t> index;
  std::vector<std::vector<std::string>> order;
  std::vector<Acc> accs;
  for (const auto& row : rows) {
    std::vector<std::string> key;
    key.reserve(keys.size());
    for (const auto& k : keys) {
      auto it = row.tags.find(k);
      key.push_back(it != row.tags.end() ? it->second : key_text(row.record, k));
    }
    auto [it, inserted] = index.emplace(key, accs.size());
    if (inserted) {
      order.push_back(key);
      accs.push_back({std::vector<double>(fields.size(), 0.0), 0});
    }
    Acc& acc = accs[it->second];
    ++acc.count;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (ops[i] != Aggregation::COUNT) acc.sums[i] += *numeric_value(row.record, fields[i]);
    }
  }
  for (std::size_t gi = 0; gi < accs.size(); ++gi) {
    GroupedRow out;
    out.key = order[gi];
    for (std::size_t i = 0; i < fields.size(); ++i) {
      switch (ops[i]) {
        case Aggregation::COUNT: out.values.push_back(static_cast<double>(accs[gi].count)); break;
        case Aggregation::SUM: out.values.push_back(accs[gi].sums[i]); break;
        case Aggregation::AVG:
          out.values.push_back(accs[gi].sums[i] / static_cast<double>(accs[gi].count));
          break;
      }
    }
    g.rows.push_back(std::move(out));
  }
  return g;
}

namespace {

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::vector<std::string>> cartesian(const std::vector<std::vector<std::string>>& domains) {
  std::vector<std::vector<std::string>> out{{}};
  for (const auto& d : domains) {
    std::vector<std::vector<std::string>> next;
    for (const auto& prefix : out) {
      for (const auto& v : d) {
        auto t = prefix;
        t.push_back(v);
        next.push_back(std::move(t));
      }
    }
    out = std::move(next);
  }
  return out;
}

Cell empty_value(Aggregation op) {
  if (op == Aggregation::AVG) return std::nullopt;
  return 0.0;
}

}  // namespace

AnalyticalTable reshape_table(const Grouped& g, Structure S, const std::vector<std::string>& row_keys,
                              const std::vector<std::string>& col_keys, const Domains& domains) {
  auto position = [&](const std::string& k) {
    auto it = std::find(g.keys.begin(), g.keys.end(), k);
    if (it == g.keys.end()) throw Error(ErrorKind::MissingKey, "grouping lacks header key " + k);
    return static_cast<std::size_t>(it - g.keys.begin());
  };
  auto domain_of = [&](const std::string& k) {
    const std::size_t pos = position(k);
    auto it = domains.find(k);
    if (it != domains.end()) return it->second;
    std::set<std::string> seen;
    for (const auto& r : g.rows) seen.insert(r.key[pos]);
    return std::vector<std::string>(seen.begin(), seen.end());
  };
  const bool use_rows = S != Structure::FC;
  const bool use_cols = S != Structure::CF;
  std::vector<std::vector<std::string>> row_domains, col_domains;
  if (use_rows) {
    if (row_keys.empty()) throw Error(ErrorKind::MissingKey, "structure needs row keys");
    for (const auto& k : row_keys) row_domains.push_back(domain_of(k));
  }
  if (use_cols) {
    if (col_keys.empty()) throw Error(ErrorKind::MissingKey, "structure needs column keys");
    for (const auto& k : col_keys) col_domains.push_back(domain_of(k));
  }
  if (g.metric_labels.empty()) throw Error(ErrorKind::EmptyProjection, "no metric to tabulate");

  std::map<std::vector<std::string>, const GroupedRow*> lookup;
  for (const auto& r : g.rows) lookup[r.key] = &r;
  auto find = [&](const std::vector<std::string>& row_t, const std::vector<std::string>& col_t) -> const GroupedRow* {
    std::vector<std::string> key(g.keys.size());
    if (use_rows) {
      for (std::size_t i = 0; i < row_keys.size(); ++i) key[position(row_keys[i])] = row_t[i];
    }
    if (use_cols) {
      for (std::size_t i = 0; i < col_keys.size(); ++i) key[position(col_keys[i])] = col_t[i];
    }
    auto it = lookup.find(key);
    return it == lookup.end() ? nullptr : it->second;
  };
  auto value = [&](const GroupedRow* r, std::size_t m) { return r ? r->values[m] : empty_value(g.ops[m]); };

  AnalyticalTable t;
  t.structure = S;
  const auto row_tuples = use_rows ? cartesian(row_domains) : std::vector<std::vector<std::string>>{};
  const auto col_tuples = use_cols ? cartesian(col_domains) : std::vector<std::vector<std::string>>{};
  switch (S) {
    case Structure::CF:
      t.index_header = join(row_keys, " / ");
      for (const auto& rt : row_tuples) {
        t.row_headers.push_back(join(rt, " / "));
        const auto* r = find(rt, {});
        std::vector<Cell> cells;
        for (std::size_t m = 0; m < g.metric_labels.size(); ++m) cells.push_back(value(r, m));
        t.cells.push_back(std::move(cells));
      }
      t.col_headers = g.metric_labels;
      break;
    case Structure::FC:
      t.index_header = "Metric";
      t.row_headers = g.metric_labels;
      for (const auto& ct : col_tuples) t.col_headers.push_back(join(ct, " / "));
      for (std::size_t m = 0; m < g.metric_labels.size(); ++m) {
        std::vector<Cell> cells;
        for (const auto& ct : col_tuples) cells.push_back(value(find({}, ct), m));
        t.cells.push_back(std::move(cells));
      }
      break;
    case Structure::XC:
      t.index_header = join(row_keys, " / ");
      for (const auto& ct : col_tuples) t.col_headers.push_back(join(ct, " / "));
      for (const auto& rt : row_tuples) {
        t.row_headers.push_back(join(rt, " / "));
        std::vector<Cell> cells;
        for (const auto& ct : col_tuples) cells.push_back(value(find(rt, ct), 0));
        t.cells.push_back(std::move(cells));
      }
      break;
  }
  return t;
}

AnalyticalTable transpose(const AnalyticalTable& t) {
  AnalyticalTable out;
  out.structure = t.structure == Structure::FC ? Structure::CF
                  : t.structure == Structure::CF ? Structure::FC
                                                 : Structure::XC;
  out.index_header = t.index_header;
  out.index_canon = t.index_canon;
  out.row_headers = t.col_headers;
  out.col_headers = t.row_headers;
  out.row_canon = t.col_canon;
  out.col_canon = t.row_canon;
  out.cells.assign(t.cols(), std::vector<Cell>(t.rows()));
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) out.cells[j][i] = t.cells[i][j];
  }
  return out;
}

AnalyticalTable synthesize_analytical_table(const std::vector<TransactionRecord>& raw, const OpenLogic& logic,
                                            const std::map<std::string, double>& params) {
  validate_open_logic(logic);
  std::vector<Row> rows = to_rows(raw);
  Domains domains;
  for (const auto& c : logic.constraints) {
    if (c.op_template == "=" || c.op_template == "!=" || c.op_template == "<" || c.op_template == "<=" ||
        c.op_template == ">" || c.op_template == ">=") {
      rows = apply_filter(rows, c.field, c.op_template, c.start);
      continue;
    }
    double step = 0.0;
    if (const auto* d = std::get_if<double>(&c.step)) {
      step = *d;
    } else {
      const auto& name = std::get<std::string>(c.step);
      auto it = params.find(name);
      if (it == params.end()) throw Error(ErrorKind::InvalidParam, "unbound step parameter " + name);
      step = it->second;
    }
    const auto lo = constraint_bound(c.start, c.field);
    const auto hi = constraint_bound(c.end, c.field);
    if (!lo || !hi) throw Error(ErrorKind::InvalidBounds, "binning on " + c.field);
    rows = apply_binning(rows, c.field, *lo, *hi, step, c.op_template);
    std::vector<std::string> labels;
    for (const auto& b : make_bins(c.field, *lo, *hi, step, c.op_template)) labels.push_back(b.label);
    domains[c.field] = std::move(labels);
  }
  std::vector<std::string> keys;
  auto add = [&](const std::vector<std::string>& ks) {
    for (const auto& k : ks) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
  };
  if (logic.structure != Structure::FC) add(logic.row_keys);
  if (logic.structure != Structure::CF) add(logic.col_keys);
  const Grouped g = group_aggregate(rows, keys, logic.fields, logic.ops);
  return reshape_table(g, logic.structure, logic.row_keys, logic.col_keys, domains);
}

// ---------------------------------------------------------------------------
// Registry

const std::vector<FunctionInfo>& function_registry() {
  static const std::vector<FunctionInfo> kRegistry = {
      {"F1", "Yearly supply and trade volume", Structure::CF, Scope::block, Period::yearly, {},
       {"supply volume", "trade volume"}, "", "Year",
       {"Total_Supply_Change_Pct", "Supply_Trend_Direction", "Total_Transaction_Change_Pct",
        "Transaction_Trend_Direction"}},
      {"F2", "Monthly supply and trade volume", Structure::CF, Scope::block, Period::monthly, {},
       {"supply volume", "trade volume"}, "", "Month",
       {"Base_Period_Transaction_Units", "Terminal_Period_Transaction_Units", "Total_Transaction_Change_Pct",
        "Transaction_Trend_Direction"}},
      {"F3", "Transaction counts by area band", Structure::CF, Scope::block, Period::yearly, {"area_bin_step"},
       {"area range counts"}, "area_range", "",
       {"Dominant_Area_Segment", "Dominant_Area_Segment_Volume", "Total_Transaction_Units"}},
      {"F4", "Transaction counts by price band", Structure::CF, Scope::block, Period::yearly, {"price_bin_step"},
       {"price range counts"}, "price_range", "",
       {"Dominant_Price_Segment", "Dominant_Price_Segment_Volume", "Total_Transaction_Units"}},
      {"F5", "Price by area cross matrix", Structure::XC, Scope::block, Period::yearly,
       {"area_bin_step", "price_bin_step"}, {}, "price_range", "",
       {"Peak_Segment_Volume", "Modal_Price_Segment", "Modal_Area_Segment"}},
      {"F6", "Yearly average total price", Structure::FC, Scope::block, Period::yearly, {},
       {"avg price", "trade volume"}, "", "Metric",
       {"Base_Period_Transaction_Price", "Terminal_Period_Transaction_Price", "Transaction_Change_Price",
        "Price_Trend_Direction"}},
      {"F7", "Yearly unit-price trend", Structure::FC, Scope::block, Period::yearly, {}, {"unit price"}, "",
       "Metric", {"Base_Period_Avg_Price", "Terminal_Period_Avg_Price", "Total_Price_Change_Pct",
                  "Price_Trend_Direction"}},
      {"F8", "Total traded area by year", Structure::CF, Scope::block, Period::yearly, {},
       {"total trade area", "trade volume"}, "", "Year",
       {"Base_Period_Traded_Area", "Terminal_Period_Traded_Area", "Total_Area_Change_Pct", "Area_Trend_Direction"}},
      {"F9", "Block by year unit price", Structure::XC, Scope::city, Period::yearly, {}, {}, "", "Block",
       {"Base_Period_Avg_Price", "Terminal_Period_Avg_Price", "Absolute_Price_Change", "Price_Trend_Direction"}},
      {"F10", "Monthly unit-price trend", Structure::FC, Scope::block, Period::monthly, {}, {"unit price"}, "",
       "Metric", {"Base_Period_Avg_Price", "Terminal_Period_Avg_Price", "Absolute_Price_Change",
                  "Price_Trend_Direction"}},
      {"F11", "Supply versus trade comparison", Structure::FC, Scope::block, Period::yearly, {},
       {"supply volume", "trade volume"}, "", "Metric",
       {"Base_Period_Transaction_Units", "Terminal_Period_Transaction_Units", "Transaction_Change_Units",
        "Total_Transaction_Change_Pct"}},
  };
  return kRegistry;
}

bool is_function_id(std::string_view id) {
  const auto& r = function_registry();
  return std::any_of(r.begin(), r.end(), [&](const FunctionInfo& f) { return f.id == id; });
}

const FunctionInfo& function_info(std::string_view id) {
  for (const auto& f : function_registry()) {
    if (f.id == id) return f;
  }
  throw Error(ErrorKind::UnknownFunction, std::string(id));
}

const std::map<std::string, std::vector<double>>& parameter_candidates() {
  static const std::map<std::string, std::vector<double>> kCandidates = {
      {"area_bin_step", {10, 15, 20, 25, 30}},
      {"price_bin_step", {0.75, 1.0, 1.5, 1.75, 2.0}},
  };
  return kCandidates;
}

void validate_params(const FunctionInfo& f, const std::map<std::string, double>& params) {
  for (const auto& [name, value] : params) {
    if (std::find(f.params.begin(), f.params.end(), name) == f.params.end()) {
      throw Error(ErrorKind::InvalidParam, f.id + " takes no parameter " + name);
    }
    const auto& candidates = parameter_candidates().at(name);
    if (std::find(candidates.begin(), candidates.end(), value) == candidates.end()) {
      throw Error(ErrorKind::InvalidParam, name + "=" + format_number(value) + " is not a candidate value");
    }
  }
  for (const auto& name : f.params) {
    if (!params.count(name)) throw Error(ErrorKind::InvalidParam, f.id + " needs parameter " + name);
  }
}

namespace {

constexpr double kAreaStart = 50, kAreaEnd = 150;       // F3
constexpr double kPriceStart = 0, kPriceEnd = 12;       // F4
constexpr double kXPriceStart = 1.5, kXPriceEnd = 7.5;  // F5 rows
constexpr double kXAreaStart = 60, kXAreaEnd = 140;     // F5 columns

ConstraintSpec period_constraint(Period p, const DateRange& period) {
  if (p == Period::yearly) {
    return {"year", "{}", static_cast<double>(static_cast<int>(period.from.year())),
            static_cast<double>(static_cast<int>(period.to.year()) + 1), 1.0};
  }
  return {"month", "{}", format_month(month_ordinal(period.from)), format_month(month_ordinal(period.to) + 1), 1.0};
}

}  // namespace

OpenLogic to_open_logic(const ClosedCall& call, const DateRange& period) {
  const FunctionInfo& f = function_info(call.function_id);
  validate_params(f, call.params);
  const std::string time_key = f.period == Period::yearly ? "year" : "month";
  OpenLogic l;
  l.structure = f.structure;
  const auto& id = f.id;
  if (id == "F1" || id == "F2" || id == "F8") {
    l.row_keys = {time_key};
    l.constraints = {period_constraint(f.period, period)};
    l.fields = id == "F8" ? std::vector<std::string>{"dim_area", "trade_sets"}
                          : std::vector<std::string>{"supply_sets", "trade_sets"};
    l.ops = {Aggregation::SUM, Aggregation::SUM};
  } else if (id == "F3") {
    l.row_keys = {"dim_area"};
    l.constraints = {{"dim_area", "-", kAreaStart, kAreaEnd, call.params.at("area_bin_step")}};
    l.fields = {"trade_sets"};
    l.ops = {Aggregation::COUNT};
  } else if (id == "F4") {
    l.row_keys = {"price_m"};
    l.constraints = {{"price_m", "{}-{}M", kPriceStart, kPriceEnd, call.params.at("price_bin_step")}};
    l.fields = {"trade_sets"};
    l.ops = {Aggregation::COUNT};
  } else if (id == "F5") {
    l.row_keys = {"price_m"};
    l.col_keys = {"dim_area"};
    l.constraints = {{"price_m", "{}-{}M", kXPriceStart, kXPriceEnd, call.params.at("price_bin_step")},
                     {"dim_area", "-", kXAreaStart, kXAreaEnd, call.params.at("area_bin_step")}};
    l.fields = {"trade_sets"};
    l.ops = {Aggregation::COUNT};
  } else if (id == "F6") {
    l.col_keys = {time_key};
    l.constraints = {period_constraint(f.period, period)};
    l.fields = {"dim_price", "trade_sets"};
    l.ops = {Aggregation::AVG, Aggregation::SUM};
  } else if (id == "F7" || id == "F10") {
    l.col_keys = {time_key};
    l.constraints = {period_constraint(f.period, period)};
    l.fields = {"dim_unit_price"};
    l.ops = {Aggregation::AVG};
  } else if (id == "F9") {
    l.row_keys = {"block"};
    l.col_keys = {time_key};
    l.constraints = {period_constraint(f.period, period)};
    l.fields = {"dim_unit_price"};
    l.ops = {Aggregation::AVG};
  } else {  // F11
    l.col_keys = {time_key};
    l.constraints = {period_constraint(f.period, period)};
    l.fields = {"supply_sets", "trade_sets"};
    l.ops = {Aggregation::SUM, Aggregation::SUM};
  }
  return l;
}

// ---------------------------------------------------------------------------
// Direct implementations. Each walks the records once per output, mirroring
// the semantics of the generic pipeline without sharing its code path.

namespace {

struct Axis {
  std::vector<std::string> labels;
  int first = 0;  // year or month ordinal of labels[0]
  Period period = Period::yearly;

  std::optional<std::size_t> slot(const TransactionRecord& r) const {
    const int v = period == Period::yearly ? static_cast<int>(r.date_code.year()) : month_ordinal(r.date_code);
    if (v < first || v >= first + static_cast<int>(labels.size())) return std::nullopt;
    return static_cast<std::size_t>(v - first);
  }
};

Axis time_axis(Period p, const DateRange& period) {
  Axis a;
  a.period = p;
  if (p == Period::yearly) {
    a.first = static_cast<int>(period.from.year());
    for (int y = a.first; y <= static_cast<int>(period.to.year()); ++y) a.labels.push_back(std::to_string(y));
  } else {
    a.first = month_ordinal(period.from);
    for (int m = a.first; m <= month_ordinal(period.to); ++m) a.labels.push_back(format_month(m));
  }
  if (a.labels.empty()) throw Error(ErrorKind::InvalidBounds, "empty period");
  return a;
}

std::optional<std::size_t> scan_bins(const std::vector<Bin>& bins, double v) {
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (bins[i].lo <= v && v < bins[i].hi) return i;
  }
  return std::nullopt;
}

std::vector<std::string> labels_of(const std::vector<Bin>& bins) {
  std::vector<std::string> out;
  for (const auto& b : bins) out.push_back(b.label);
  return out;
}

// Per-slot accumulators for one metric.
struct Column {
  Aggregation op;
  std::vector<double> sum;
  std::vector<std::size_t> count;

  Column(Aggregation o, std::size_t n) : op(o), sum(n, 0.0), count(n, 0) {}
  void add(std::size_t i, double v) {
    sum[i] += v;
    ++count[i];
  }
  Cell at(std::size_t i) const {
    switch (op) {
      case Aggregation::COUNT: return static_cast<double>(count[i]);
      case Aggregation::SUM: return sum[i];
      case Aggregation::AVG:
        if (count[i] == 0) return std::nullopt;
        return sum[i] / static_cast<double>(count[i]);
    }
    return std::nullopt;
  }
};

double field_of(const TransactionRecord& r, std::string_view f) {
  if (f == "supply_sets") return static_cast<double>(r.supply_sets);
  if (f == "trade_sets") return static_cast<double>(r.trade_sets);
  if (f == "dim_area") return r.dim_area;
  if (f == "dim_price") return r.dim_price;
  return r.dim_unit_price;
}

// Time series of (field, op) pairs over a period axis, laid out CF or FC.
AnalyticalTable time_table(const std::vector<TransactionRecord>& raw, Structure s, const Axis& axis,
                           const std::vector<std::pair<std::string, Aggregation>>& metrics) {
  std::vector<Column> cols;
  for (const auto& m : metrics) cols.emplace_back(m.second, axis.labels.size());
  for (const auto& r : raw) {
    const auto i = axis.slot(r);
    if (!i) continue;
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      cols[m].add(*i, metrics[m].second == Aggregation::COUNT ? 0.0 : field_of(r, metrics[m].first));
    }
  }
  AnalyticalTable t;
  t.structure = s;
  std::vector<std::string> names;
  for (const auto& m : metrics) names.push_back(metric_label(m.first, m.second));
  if (s == Structure::CF) {
    t.index_header = axis.period == Period::yearly ? "year" : "month";
    t.row_headers = axis.labels;
    t.col_headers = names;
    for (std::size_t i = 0; i < axis.labels.size(); ++i) {
      std::vector<Cell> row;
      for (const auto& c : cols) row.push_back(c.at(i));
      t.cells.push_back(std::move(row));
    }
  } else {
    t.index_header = "Metric";
    t.row_headers = names;
    t.col_headers = axis.labels;
    for (const auto& c : cols) {
      std::vector<Cell> row;
      for (std::size_t i = 0; i < axis.labels.size(); ++i) row.push_back(c.at(i));
      t.cells.push_back(std::move(row));
    }
  }
  return t;
}

AnalyticalTable band_counts(const std::vector<TransactionRecord>& raw, std::string_view field,
                            const std::vector<Bin>& bins) {
  std::vector<double> counts(bins.size(), 0.0);
  for (const auto& r : raw) {
    const double v = field == "price_m" ? r.dim_price / 100.0 : r.dim_area;
    if (const auto i = scan_bins(bins, v)) counts[*i] += 1.0;
  }
  AnalyticalTable t;
  t.structure = Structure::CF;
  t.index_header = std::string(field);
  t.row_headers = labels_of(bins);
  t.col_headers = {metric_label("trade_sets", Aggregation::COUNT)};
  for (double c : counts) t.cells.push_back({c});
  return t;
}

}  // namespace

AnalyticalTable run_statistical_function(std::string_view function_id, const std::vector<TransactionRecord>& raw,
                                         const FunctionArgs& args) {
  const FunctionInfo& f = function_info(function_id);
  validate_params(f, args.params);
  const auto& id = f.id;
  if (id == "F3") {
    return band_counts(raw, "dim_area", make_bins("dim_area", kAreaStart, kAreaEnd, args.params.at("area_bin_step"), "-"));
  }
  if (id == "F4") {
    return band_counts(raw, "price_m",
                       make_bins("price_m", kPriceStart, kPriceEnd, args.params.at("price_bin_step"), "{}-{}M"));
  }
  if (id == "F5") {
    const auto pbins = make_bins("price_m", kXPriceStart, kXPriceEnd, args.params.at("price_bin_step"), "{}-{}M");
    const auto abins = make_bins("dim_area", kXAreaStart, kXAreaEnd, args.params.at("area_bin_step"), "-");
    AnalyticalTable t;
    t.structure = Structure::XC;
    t.index_header = "price_m";
    t.row_headers = labels_of(pbins);
    t.col_headers = labels_of(abins);
    t.cells.assign(pbins.size(), std::vector<Cell>(abins.size(), 0.0));
    for (const auto& r : raw) {
      const auto i = scan_bins(pbins, r.dim_price / 100.0);
      const auto j = scan_bins(abins, r.dim_area);
      if (i && j) t.cells[*i][*j] = *t.cells[*i][*j] + 1.0;
    }
    return t;
  }
  const Axis axis = time_axis(f.period, args.period);
  if (id == "F9") {
    std::set<std::string> blocks;
    for (const auto& r : raw) {
      if (axis.slot(r)) blocks.insert(r.block);
    }
    const std::vector<std::string> names(blocks.begin(), blocks.end());
    std::vector<Column> per_block(names.size(), Column(Aggregation::AVG, axis.labels.size()));
    for (const auto& r : raw) {
      const auto j = axis.slot(r);
      if (!j) continue;
      const auto b = static_cast<std::size_t>(std::lower_bound(names.begin(), names.end(), r.block) - names.begin());
      per_block[b].add(*j, r.dim_unit_price);
    }
    AnalyticalTable t;
    t.structure = Structure::XC;
    t.index_header = "block";
    t.row_headers = names;
    t.col_headers = axis.labels;
    for (const auto& c : per_block) {
      std::vector<Cell> row;
      for (std::size_t j = 0; j < axis.labels.size(); ++j) row.push_back(c.at(j));
      t.cells.push_back(std::move(row));
    }
    return t;
  }
  using M = std::vector<std::pair<std::string, Aggregation>>;
  if (id == "F1" || id == "F2") {
    return time_table(raw, Structure::CF, axis, M{{"supply_sets", Aggregation::SUM}, {"trade_sets", Aggregation::SUM}});
  }
  if (id == "F8") {
    return time_table(raw, Structure::CF, axis, M{{"dim_area", Aggregation::SUM}, {"trade_sets", Aggregation::SUM}});
  }
  if (id == "F6") {
    return time_table(raw, Structure::FC, axis, M{{"dim_price", Aggregation::AVG}, {"trade_sets", Aggregation::SUM}});
  }
  if (id == "F7" || id == "F10") {
    return time_table(raw, Structure::FC, axis, M{{"dim_unit_price", Aggregation::AVG}});
  }
  return time_table(raw, Structure::FC, axis, M{{"supply_sets", Aggregation::SUM}, {"trade_sets", Aggregation::SUM}});
}

std::vector<std::string> source_columns(const Logic& logic) {
  OpenLogic open;
  if (const auto* c = std::get_if<ClosedCall>(&logic)) {
    const FunctionInfo& f = function_info(c->function_id);
    ClosedCall probe{f.id, {}};
    for (const auto& p : f.params) probe.params[p] = parameter_candidates().at(p).front();
    open = to_open_logic(probe, DateRange{make_date(2020, 1, 1), make_date(2020, 12, 31)});
  } else {
    open = std::get<OpenLogic>(logic);
  }
  std::vector<std::string> out;
  auto add = [&](std::string_view k) {
    const std::string col = source_column(k);
    if (std::find(out.begin(), out.end(), col) == out.end()) out.push_back(col);
  };
  for (const auto& f : open.fields) add(f);
  for (const auto& c : open.constraints) add(c.field);
  for (const auto& k : open.row_keys) add(k);
  for (const auto& k : open.col_keys) add(k);
  return out;
}

AnalyticalTable label_table(AnalyticalTable t, const FunctionInfo& f,
                            const std::map<std::string, std::string>& aliases) {
  auto alias = [&](const std::string& canon) {
    auto it = aliases.find(canon);
    return it == aliases.end() ? canon : it->second;
  };
  std::vector<std::string> headers;
  for (const auto& c : f.metric_canon) headers.push_back(alias(c));
  if (f.structure == Structure::CF && headers.size() == t.cols()) {
    t.col_headers = headers;
    t.col_canon = f.metric_canon;
  } else if (f.structure == Structure::FC && headers.size() == t.rows()) {
    t.row_headers = headers;
    t.row_canon = f.metric_canon;
  }
  if (!f.index_canon.empty()) {
    t.index_canon = f.index_canon;
    t.index_header = alias(f.index_canon);
  } else {
    t.index_canon.clear();
    t.index_header = f.index_label;
  }
  return t;
}

AnalyticalTable copy_header_labels(AnalyticalTable t, const AnalyticalTable& labeled) {
  if (t.structure != labeled.structure) return t;
  if (t.structure == Structure::CF && t.cols() == labeled.cols()) {
    t.col_headers = labeled.col_headers;
    t.col_canon = labeled.col_canon;
  } else if (t.structure == Structure::FC && t.rows() == labeled.rows()) {
    t.row_headers = labeled.row_headers;
    t.row_canon = labeled.row_canon;
  }
  t.index_header = labeled.index_header;
  t.index_canon = labeled.index_canon;
  return t;
}

ChartSpec chart_from_table(const AnalyticalTable& t, ChartType type) {
  ChartSpec c;
  c.chart_type = type;
  if (t.structure == Structure::CF) {
    c.categories = t.row_headers;
    for (std::size_t j = 0; j < t.cols(); ++j) {
      Series s{t.col_headers[j], {}};
      for (std::size_t i = 0; i < t.rows(); ++i) s.values.push_back(t.cells[i][j]);
      c.series.push_back(std::move(s));
    }
  } else {
    c.categories = t.col_headers;
    for (std::size_t i = 0; i < t.rows(); ++i) c.series.push_back({t.row_headers[i], t.cells[i]});
  }
  return c;
}

// ---------------------------------------------------------------------------
// Summary metrics

std::string MetricValue::render() const {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  return format_rounded(std::get<double>(value), kind);
}

std::optional<double> change_ratio(Cell base, Cell terminal) {
  if (!base || !terminal || *base == 0.0) return std::nullopt;
  return (*terminal - *base) / *base;
}

std::string trend_direction(Cell base, Cell terminal) {
  if (!base || !terminal) return "n/a";
  if (*terminal > *base) return "Increasing";
  if (*terminal < *base) return "Decreasing";
  return "Flat";
}

std::optional<PeakCell> find_peak(const AnalyticalTable& t) {
  std::optional<PeakCell> best;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const Cell& c = t.cells[i][j];
      if (!c) continue;
      if (!best || *c > best->value) best = PeakCell{*c, i, j, t.row_headers[i], t.col_headers[j]};
    }
  }
  return best;
}

namespace {

constexpr const char* kNotAvailable = "n/a";

MetricValue number_or_na(Cell v, RoundKind kind) {
  if (!v) return {std::string(kNotAvailable), kind};
  return {*v, kind};
}

// Values of metric m across the time axis.
std::vector<Cell> series_of(const AnalyticalTable& t, std::size_t m) {
  std::vector<Cell> out;
  if (t.structure == Structure::CF) {
    if (m >= t.cols()) throw Error(ErrorKind::InsufficientColumns, "table lacks metric column");
    for (const auto& row : t.cells) out.push_back(row[m]);
  } else {
    if (m >= t.rows()) throw Error(ErrorKind::InsufficientColumns, "table lacks metric row");
    out = t.cells[m];
  }
  return out;
}

std::pair<Cell, Cell> ends(const std::vector<Cell>& s) {
  if (s.size() < 2) throw Error(ErrorKind::InsufficientColumns, "trend metrics need at least two periods");
  return {s.front(), s.back()};
}

MetricValue pct(Cell base, Cell terminal) {
  const auto r = change_ratio(base, terminal);
  return r ? MetricValue{*r, RoundKind::percent} : MetricValue{std::string(kNotAvailable), RoundKind::percent};
}

MetricValue diff(Cell base, Cell terminal, RoundKind kind) {
  if (!base || !terminal) return {std::string(kNotAvailable), kind};
  return {*terminal - *base, kind};
}

Cell column_mean(const AnalyticalTable& t, std::size_t j) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& row : t.cells) {
    if (row[j]) {
      sum += *row[j];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

void dominant(const AnalyticalTable& t, SummaryMetrics& m, const std::string& segment, const std::string& volume) {
  double total = 0.0;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const double v = t.cells[i].empty() || !t.cells[i][0] ? 0.0 : *t.cells[i][0];
    total += v;
    if (!best || v > *t.cells[*best][0]) best = i;
  }
  if (!best) throw Error(ErrorKind::InsufficientColumns, "distribution table is empty");
  m[segment] = {t.row_headers[*best], RoundKind::count};
  m[volume] = number_or_na(t.cells[*best][0], RoundKind::count);
  m["Total_Transaction_Units"] = {total, RoundKind::count};
}

}  // namespace

SummaryMetrics extract_summary_metrics(const AnalyticalTable& t, std::string_view function_id) {
  const FunctionInfo& f = function_info(function_id);
  SummaryMetrics m;
  const auto& id = f.id;
  if (id == "F1") {
    const auto [sb, st] = ends(series_of(t, 0));
    const auto [tb, tt] = ends(series_of(t, 1));
    m["Total_Supply_Change_Pct"] = pct(sb, st);
    m["Supply_Trend_Direction"] = {trend_direction(sb, st)};
    m["Total_Transaction_Change_Pct"] = pct(tb, tt);
    m["Transaction_Trend_Direction"] = {trend_direction(tb, tt)};
  } else if (id == "F2" || id == "F11") {
    const auto [b, e] = ends(series_of(t, 1));
    m["Base_Period_Transaction_Units"] = number_or_na(b, RoundKind::count);
    m["Terminal_Period_Transaction_Units"] = number_or_na(e, RoundKind::count);
    m["Total_Transaction_Change_Pct"] = pct(b, e);
    if (id == "F2") {
      m["Transaction_Trend_Direction"] = {trend_direction(b, e)};
    } else {
      m["Transaction_Change_Units"] = diff(b, e, RoundKind::count);
    }
  } else if (id == "F3") {
    dominant(t, m, "Dominant_Area_Segment", "Dominant_Area_Segment_Volume");
  } else if (id == "F4") {
    dominant(t, m, "Dominant_Price_Segment", "Dominant_Price_Segment_Volume");
  } else if (id == "F5") {
    const auto peak = find_peak(t);
    if (!peak) throw Error(ErrorKind::InsufficientColumns, "cross matrix is empty");
    m["Peak_Segment_Volume"] = {peak->value, RoundKind::count};
    m["Modal_Price_Segment"] = {peak->row_label};
    m["Modal_Area_Segment"] = {peak->col_label};
  } else if (id == "F6") {
    const auto [b, e] = ends(series_of(t, 0));
    m["Base_Period_Transaction_Price"] = number_or_na(b, RoundKind::price);
    m["Terminal_Period_Transaction_Price"] = number_or_na(e, RoundKind::price);
    m["Transaction_Change_Price"] = diff(b, e, RoundKind::price);
    m["Price_Trend_Direction"] = {trend_direction(b, e)};
  } else if (id == "F7") {
    const auto [b, e] = ends(series_of(t, 0));
    m["Base_Period_Avg_Price"] = number_or_na(b, RoundKind::price);
    m["Terminal_Period_Avg_Price"] = number_or_na(e, RoundKind::price);
    m["Total_Price_Change_Pct"] = pct(b, e);
    m["Price_Trend_Direction"] = {trend_direction(b, e)};
  } else if (id == "F8") {
    const auto [b, e] = ends(series_of(t, 0));
    m["Base_Period_Traded_Area"] = number_or_na(b, RoundKind::price);
    m["Terminal_Period_Traded_Area"] = number_or_na(e, RoundKind::price);
    m["Total_Area_Change_Pct"] = pct(b, e);
    m["Area_Trend_Direction"] = {trend_direction(b, e)};
  } else if (id == "F9" || id == "F10") {
    Cell b, e;
    if (id == "F9") {
      if (t.cols() < 2) throw Error(ErrorKind::InsufficientColumns, "trend metrics need at least two periods");
      b = column_mean(t, 0);
      e = column_mean(t, t.cols() - 1);
    } else {
      std::tie(b, e) = ends(series_of(t, 0));
    }
    m["Base_Period_Avg_Price"] = number_or_na(b, RoundKind::price);
    m["Terminal_Period_Avg_Price"] = number_or_na(e, RoundKind::price);
    m["Absolute_Price_Change"] = diff(b, e, RoundKind::price);
    m["Price_Trend_Direction"] = {trend_direction(b, e)};
  }
  return m;
}

}  // namespace dynaslide
