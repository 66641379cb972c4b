#pragma once

// Helpers shared by the test binaries: a cached corpus, hand-rolled record
// generators and brute-force oracles that never call into the code under test.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dynaslide/datastore.hpp"
#include "dynaslide/model.hpp"
#include "dynaslide/stats.hpp"

namespace testsupport {

using namespace dynaslide;

inline const Store& corpus_store() {
  static const Store store = [] {
    CorpusConfig cfg;
    return Store(clean_and_filter(generate_synthetic_records(cfg)));
  }();
  return store;
}

inline Date random_date(std::mt19937_64& rng, int y0 = 2020, int y1 = 2024) {
  std::uniform_int_distribution<int> y(y0, y1);
  std::uniform_int_distribution<unsigned> m(1, 12), d(1, 28);
  return make_date(y(rng), m(rng), d(rng));
}

// Record on a coarse grid so bin edges are hit exactly now and then:
// dim_price in multiples of 25 (price_m in quarters), integer areas.
inline TransactionRecord grid_record(std::mt19937_64& rng, const std::string& city = "Beijing",
                                     const std::string& block = "Chaoyang") {
  TransactionRecord r;
  r.city = city;
  r.block = block;
  r.project = "P" + std::to_string(rng() % 4);
  r.date_code = random_date(rng);
  r.supply_sets = static_cast<std::int64_t>(rng() % 20);
  r.trade_sets = static_cast<std::int64_t>(rng() % 15);
  r.dim_area = static_cast<double>(40 + rng() % 140);
  r.dim_price = 25.0 * static_cast<double>(4 + rng() % 40);
  r.dim_unit_price = r.dim_price * 10000.0 / r.dim_area;
  return r;
}

// Records spread over three blocks of one city.
inline std::vector<TransactionRecord> random_block_records(std::mt19937_64& rng, std::size_t n) {
  const char* blocks[] = {"Chaoyang", "Haidian", "Xicheng"};
  std::vector<TransactionRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(grid_record(rng, "Beijing", blocks[rng() % 3]));
  return out;
}

inline FunctionArgs random_args(const FunctionInfo& f, std::mt19937_64& rng) {
  FunctionArgs a;
  for (const auto& p : f.params) {
    const auto& c = parameter_candidates().at(p);
    a.params[p] = c[rng() % c.size()];
  }
  if (f.period == Period::yearly) {
    int y0 = 2020 + static_cast<int>(rng() % 5), y1 = 2020 + static_cast<int>(rng() % 5);
    if (y1 < y0) std::swap(y0, y1);
    if (y0 == y1) y0 == 2024 ? --y0 : ++y1;
    a.period = {make_date(y0, 1, 1), make_date(y1, 12, 31)};
  } else {
    const int first = 2020 * 12 + 1 + static_cast<int>(rng() % 30);
    const int last = first + 11 + static_cast<int>(rng() % 7);
    a.period = {first_day_of_month(first), last_day_of_month(last)};
  }
  return a;
}

// Independent predicate evaluation for the datastore oracle.
inline bool oracle_holds(const TransactionRecord& r, const Predicate& p) {
  auto text = [&](const std::string& f) -> const std::string* {
    if (f == "city") return &r.city;
    if (f == "block") return &r.block;
    if (f == "project") return &r.project;
    return nullptr;
  };
  if (const auto* s = text(p.field)) {
    const std::string& lo = std::get<std::string>(p.lo);
    if (p.op == PredicateOp::eq) return *s == lo;
    return lo <= *s && *s <= std::get<std::string>(p.hi);
  }
  if (p.field == "date_code") {
    const std::string d = format_date(r.date_code);  // ISO text orders like dates
    const std::string& lo = std::get<std::string>(p.lo);
    if (p.op == PredicateOp::eq) return d == lo;
    return lo <= d && d <= std::get<std::string>(p.hi);
  }
  double x = 0;
  if (p.field == "supply_sets") x = static_cast<double>(r.supply_sets);
  else if (p.field == "trade_sets") x = static_cast<double>(r.trade_sets);
  else if (p.field == "dim_area") x = r.dim_area;
  else if (p.field == "dim_price") x = r.dim_price;
  else if (p.field == "dim_unit_price") x = r.dim_unit_price;
  const double lo = std::get<double>(p.lo);
  if (p.op == PredicateOp::eq) return x == lo;
  return lo <= x && x <= std::get<double>(p.hi);
}

// One text line per projected record; multisets compare as sorted vectors.
inline std::string projected_key(const TransactionRecord& r, const std::vector<std::string>& projection) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& f : projection) {
    if (f == "city") os << r.city;
    else if (f == "block") os << r.block;
    else if (f == "project") os << r.project;
    else if (f == "date_code") os << format_date(r.date_code);
    else if (f == "supply_sets") os << r.supply_sets;
    else if (f == "trade_sets") os << r.trade_sets;
    else if (f == "dim_area") os << r.dim_area;
    else if (f == "dim_price") os << r.dim_price;
    else if (f == "dim_unit_price") os << r.dim_unit_price;
    os << '|';
  }
  return os.str();
}

inline std::vector<std::string> oracle_scan(const std::vector<TransactionRecord>& table, const QuerySpec& q) {
  std::vector<std::string> out;
  for (const auto& r : table) {
    bool ok = true;
    for (const auto& p : q.predicates) ok = ok && oracle_holds(r, p);
    if (ok) out.push_back(projected_key(r, q.projection));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::string> result_keys(const QueryResult& res) {
  std::vector<std::string> out;
  for (const auto& r : res.rows) out.push_back(projected_key(r, res.projection));
  std::sort(out.begin(), out.end());
  return out;
}

// Random query over a table of the store: equality on scope columns, ranges on
// dates and numeric columns, random non-empty projection.
inline QuerySpec random_query(const Store& store, std::mt19937_64& rng) {
  const auto tables = store.table_names();
  QuerySpec q;
  q.table_name = tables[rng() % tables.size()];
  const auto& rows = store.table(q.table_name);
  const TransactionRecord& pivot = rows[rng() % rows.size()];
  if (rng() % 4 != 0) q.predicates.push_back({"city", PredicateOp::eq, pivot.city, {}});
  if (rng() % 3 != 0) q.predicates.push_back({"block", PredicateOp::eq, pivot.block, {}});
  if (rng() % 5 == 0) q.predicates.push_back({"project", PredicateOp::eq, pivot.project, {}});
  if (rng() % 2 == 0) {
    Date a = random_date(rng), b = random_date(rng);
    if (b < a) std::swap(a, b);
    q.predicates.push_back({"date_code", PredicateOp::between, format_date(a), format_date(b)});
  }
  if (rng() % 6 == 0) q.predicates.push_back({"date_code", PredicateOp::eq, format_date(pivot.date_code), {}});
  const char* numeric[] = {"supply_sets", "trade_sets", "dim_area", "dim_price", "dim_unit_price"};
  for (const char* f : numeric) {
    if (rng() % 4 != 0) continue;
    const TransactionRecord& other = rows[rng() % rows.size()];
    auto value = [&](const TransactionRecord& r) {
      std::string k(f);
      if (k == "supply_sets") return static_cast<double>(r.supply_sets);
      if (k == "trade_sets") return static_cast<double>(r.trade_sets);
      if (k == "dim_area") return r.dim_area;
      if (k == "dim_price") return r.dim_price;
      return r.dim_unit_price;
    };
    double a = value(pivot), b = value(other);
    if (b < a) std::swap(a, b);
    if (rng() % 5 == 0) q.predicates.push_back({f, PredicateOp::eq, a, {}});
    else q.predicates.push_back({f, PredicateOp::between, a, b});
  }
  std::vector<std::string> fields(kSchemaFields.begin(), kSchemaFields.end());
  for (const auto& f : fields) {
    if (rng() % 2 == 0) q.projection.push_back(f);
  }
  if (q.projection.empty()) q.projection.push_back(fields[rng() % fields.size()]);
  return q;
}

// Brute-force cross matrix: for each (row bin, col bin) walk every record.
struct BinEdges {
  std::vector<double> lo, hi;
};

inline BinEdges oracle_edges(double start, double end, double step) {
  BinEdges e;
  for (int i = 0; start + i * step < end - 1e-12; ++i) {
    e.lo.push_back(start + i * step);
    e.hi.push_back(std::min(start + (i + 1) * step, end));
  }
  return e;
}

// A random cross-matrix instance: <=100 records, <=5x5 bins on price_m and
// dim_area (either orientation), COUNT or SUM of trade_sets.
struct XcInstance {
  std::vector<TransactionRecord> records;
  OpenLogic logic;
  BinEdges row_edges, col_edges;
  std::string row_field, col_field;
};

inline XcInstance random_xc_instance(std::mt19937_64& rng) {
  XcInstance x;
  const std::size_t n = rng() % 101;
  for (std::size_t i = 0; i < n; ++i) x.records.push_back(grid_record(rng));
  auto axis = [&](const std::string& field, ConstraintSpec& spec, BinEdges& edges) {
    const double price_starts[] = {1.0, 1.5, 2.0}, price_steps[] = {0.25, 0.5, 0.75, 1.0, 1.5};
    const double area_starts[] = {40, 60, 80}, area_steps[] = {10, 15, 20, 25, 30};
    const bool price = field == "price_m";
    const double start = price ? price_starts[rng() % 3] : area_starts[rng() % 3];
    const double step = price ? price_steps[rng() % 5] : area_steps[rng() % 5];
    const int bins = 1 + static_cast<int>(rng() % 5);
    // Sometimes clip the last bin halfway.
    const double end = start + step * bins - (rng() % 3 == 0 ? step / 2 : 0.0);
    spec = {field, price ? "{}-{}M" : "-", start, end, step};
    edges = oracle_edges(start, end, step);
  };
  const bool price_rows = rng() % 2 == 0;
  x.row_field = price_rows ? "price_m" : "dim_area";
  x.col_field = price_rows ? "dim_area" : "price_m";
  ConstraintSpec rc, cc;
  axis(x.row_field, rc, x.row_edges);
  axis(x.col_field, cc, x.col_edges);
  x.logic.structure = Structure::XC;
  x.logic.row_keys = {x.row_field};
  x.logic.col_keys = {x.col_field};
  x.logic.constraints = {rc, cc};
  x.logic.fields = {"trade_sets"};
  x.logic.ops = {rng() % 2 == 0 ? Aggregation::COUNT : Aggregation::SUM};
  return x;
}

inline double oracle_field(const TransactionRecord& r, const std::string& f) {
  return f == "price_m" ? r.dim_price / 100.0 : r.dim_area;
}

// cells[i][j] by walking every record for every (i, j).
inline std::vector<std::vector<double>> oracle_xc(const XcInstance& x) {
  std::vector<std::vector<double>> cells(x.row_edges.lo.size(), std::vector<double>(x.col_edges.lo.size(), 0.0));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t j = 0; j < cells[i].size(); ++j) {
      for (const auto& r : x.records) {
        const double a = oracle_field(r, x.row_field), b = oracle_field(r, x.col_field);
        if (a >= x.row_edges.lo[i] && a < x.row_edges.hi[i] && b >= x.col_edges.lo[j] && b < x.col_edges.hi[j]) {
          cells[i][j] += x.logic.ops[0] == Aggregation::COUNT ? 1.0 : static_cast<double>(r.trade_sets);
        }
      }
    }
  }
  return cells;
}

inline std::size_t oracle_in_range(const XcInstance& x) {
  std::size_t n = 0;
  for (const auto& r : x.records) {
    const double a = oracle_field(r, x.row_field), b = oracle_field(r, x.col_field);
    n += a >= x.row_edges.lo.front() && a < x.row_edges.hi.back() && b >= x.col_edges.lo.front() &&
         b < x.col_edges.hi.back();
  }
  return n;
}

}  // namespace testsupport
