#include "dynaslide/datastore.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "dynaslide/parallel.hpp"

namespace dynaslide {

void validate_config(const CorpusConfig& cfg) {
  if (cfg.cities.empty()) throw Error(ErrorKind::InvalidConfig, "cities is empty");
  if (cfg.market_types.empty()) throw Error(ErrorKind::InvalidConfig, "market_types is empty");
  if (cfg.records_per_block < 1) throw Error(ErrorKind::InvalidConfig, "records_per_block must be >= 1");
  if (cfg.blocks_per_city < 1) throw Error(ErrorKind::InvalidConfig, "blocks_per_city must be >= 1");
  if (cfg.date_window.last < cfg.date_window.first) throw Error(ErrorKind::InvalidConfig, "date window is inverted");
  for (const auto& m : cfg.market_types) {
    if (m != "new" && m != "resale") throw Error(ErrorKind::InvalidConfig, "unknown market type '" + m + "'");
  }
  std::set<std::string> seen;
  for (const auto& c : cfg.cities) {
    if (normalize_name(c).empty()) throw Error(ErrorKind::InvalidConfig, "empty city name");
    if (!seen.insert(normalize_name(c)).second) throw Error(ErrorKind::InvalidConfig, "duplicate city " + c);
  }
}

std::string make_table_name(std::string_view market, std::string_view city) {
  std::string out(market);
  out += '_';
  for (char c : city) {
    if (c == ' ') {
      out += '_';
    } else {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

std::pair<std::string, std::string> split_table_name(std::string_view table) {
  const auto pos = table.find('_');
  if (pos == std::string_view::npos || pos == 0 || pos + 1 == table.size()) {
    throw Error(ErrorKind::ParseError, "table name must be <market>_<city>: '" + std::string(table) + "'");
  }
  return {std::string(table.substr(0, pos)), std::string(table.substr(pos + 1))};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return seed ^ (0x9E3779B97F4A7C15ULL * (index + 1));
}

// ---------------------------------------------------------------------------
// Generation

namespace {

struct CityProfile {
  double base_unit_price;  // CNY / m2, resale
  std::vector<std::string> blocks;
};

CityProfile city_profile(const std::string& city) {
  if (city == "Beijing") {
    return {62000, {"Liangxiang", "Chaoyang", "Haidian", "Tongzhou", "Fengtai", "Shunyi", "Changping", "Daxing",
                    "Wangjing", "Huilongguan"}};
  }
  if (city == "Guangzhou") {
    return {36000, {"Tianhe", "Panyu", "Haizhu", "Baiyun", "Huangpu", "Liwan", "Yuexiu", "Huadu", "Nansha",
                    "Zengcheng"}};
  }
  if (city == "Shenzhen") {
    return {66000, {"Futian", "Nanshan", "Luohu", "Bao'an", "Longgang", "Longhua", "Yantian", "Guangming",
                    "Pingshan", "Qianhai"}};
  }
  return {30000, {}};
}

const char* const kProjectSuffixes[] = {"Garden", "Court", "Residence", "Heights", "Park", "Mansion", "Terrace",
                                        "Square"};

double round_to(double v, double unit) { return std::round(v / unit) * unit; }

struct BlockJob {
  std::string table;
  std::string city;
  std::string block;
  double base_unit_price;
  std::uint64_t seed;
};

std::vector<TaggedRecord> generate_block(const BlockJob& job, const CorpusConfig& cfg) {
  std::mt19937_64 rng(job.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double block_mult = std::exp(std::normal_distribution<double>(0.0, 0.18)(rng));
  const double drift = -0.06 + 0.14 * unit(rng);  // yearly unit-price drift
  const int n_projects = 3 + static_cast<int>(rng() % 4);
  std::vector<std::string> projects;
  for (int i = 0; i < n_projects; ++i) {
    projects.push_back(job.block + " " + kProjectSuffixes[(rng() % 8 + static_cast<unsigned>(i)) % 8] + " " +
                       std::to_string(i + 1));
  }
  const std::chrono::sys_days first{cfg.date_window.first};
  const std::chrono::sys_days last{cfg.date_window.last};
  const auto span_days = (last - first).count() + 1;
  const int first_year = static_cast<int>(cfg.date_window.first.year());

  std::lognormal_distribution<double> area_dist(std::log(90.0), 0.3);
  std::lognormal_distribution<double> noise(0.0, 0.08);
  std::vector<TaggedRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.records_per_block));
  for (int i = 0; i < cfg.records_per_block; ++i) {
    TransactionRecord r;
    r.city = job.city;
    r.block = job.block;
    r.project = projects[rng() % projects.size()];
    r.date_code = Date{first + std::chrono::days(static_cast<long>(rng() % static_cast<std::uint64_t>(span_days)))};
    r.supply_sets = static_cast<std::int64_t>(rng() % 21);
    r.trade_sets = 1 + static_cast<std::int64_t>(rng() % 12);
    r.dim_area = round_to(std::clamp(area_dist(rng), 35.0, 220.0), 0.01);
    const int years = static_cast<int>(r.date_code.year()) - first_year;
    const double unit_price =
        job.base_unit_price * block_mult * std::pow(1.0 + drift, years) * noise(rng);
    r.dim_unit_price = std::max(1.0, std::round(unit_price));
    const double jitter = 1.0 + (unit(rng) - 0.5) * 0.018;
    r.dim_price = std::max(0.01, round_to(r.dim_area * r.dim_unit_price / 1e4 * jitter, 0.01));
    out.push_back({job.table, std::move(r)});
  }
  return out;
}

}  // namespace

std::vector<TaggedRecord> generate_synthetic_records(const CorpusConfig& cfg, int jobs) {
  validate_config(cfg);
  std::vector<BlockJob> work;
  std::uint64_t index = 0;
  for (const auto& raw_city : cfg.cities) {
    const std::string city = normalize_name(raw_city);
    CityProfile profile = city_profile(city);
    for (int b = static_cast<int>(profile.blocks.size()); b < cfg.blocks_per_city; ++b) {
      profile.blocks.push_back(city + " District " + std::to_string(b + 1));
    }
    for (const auto& market : cfg.market_types) {
      const double base = profile.base_unit_price * (market == "new" ? 1.1 : 1.0);
      for (int b = 0; b < cfg.blocks_per_city; ++b) {
        work.push_back({make_table_name(market, city), city, profile.blocks[static_cast<std::size_t>(b)], base,
                        derive_seed(cfg.seed, index++)});
      }
    }
  }
  std::vector<std::vector<TaggedRecord>> parts(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t i) { parts[i] = generate_block(work[i], cfg); });
  std::vector<TaggedRecord> out;
  for (auto& p : parts) {
    std::move(p.begin(), p.end(), std::back_inserter(out));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cleaning

std::string normalize_name(std::string_view s) {
  std::string out;
  bool word_start = true;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      word_start = true;
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    const auto uc = static_cast<unsigned char>(c);
    out += static_cast<char>(word_start ? std::toupper(uc) : std::tolower(uc));
    word_start = false;
  }
  return out;
}

std::vector<TaggedRecord> clean_and_filter(const std::vector<TaggedRecord>& records, const DateWindow& window,
                                           std::size_t min_block_records) {
  std::vector<TaggedRecord> valid;
  valid.reserve(records.size());
  for (const auto& tr : records) {
    TaggedRecord t = tr;
    t.record.city = normalize_name(t.record.city);
    t.record.block = normalize_name(t.record.block);
    try {
      validate_record(t.record, window);
    } catch (const Error&) {
      continue;
    }
    valid.push_back(std::move(t));
  }
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> counts;
  for (const auto& t : valid) ++counts[{t.table_name, t.record.city, t.record.block}];
  std::vector<TaggedRecord> out;
  for (auto& t : valid) {
    if (counts[{t.table_name, t.record.city, t.record.block}] >= min_block_records) out.push_back(std::move(t));
  }
  return out;
}

std::vector<TransactionRecord> clean_and_filter(const std::vector<TransactionRecord>& records,
                                                const DateWindow& window, std::size_t min_block_records) {
  std::vector<TaggedRecord> tagged;
  tagged.reserve(records.size());
  for (const auto& r : records) tagged.push_back({"", r});
  std::vector<TransactionRecord> out;
  for (auto& t : clean_and_filter(tagged, window, min_block_records)) out.push_back(std::move(t.record));
  return out;
}

// ---------------------------------------------------------------------------
// Store

namespace {

std::string index_key(std::string_view table, std::string_view city, std::string_view block) {
  std::string k(table);
  k += '\x1f';
  k += city;
  k += '\x1f';
  k += block;
  return k;
}

bool row_order(const TransactionRecord& a, const TransactionRecord& b) {
  return std::tie(a.date_code, a.block, a.project) < std::tie(b.date_code, b.block, b.project);
}

const std::string* categorical(const TransactionRecord& r, std::string_view field) {
  if (field == "city") return &r.city;
  if (field == "block") return &r.block;
  if (field == "project") return &r.project;
  return nullptr;
}

std::optional<double> numeric(const TransactionRecord& r, std::string_view field) {
  if (field == "supply_sets") return static_cast<double>(r.supply_sets);
  if (field == "trade_sets") return static_cast<double>(r.trade_sets);
  if (field == "dim_area") return r.dim_area;
  if (field == "dim_price") return r.dim_price;
  if (field == "dim_unit_price") return r.dim_unit_price;
  return std::nullopt;
}

}  // namespace

bool matches(const TransactionRecord& r, const Predicate& p) {
  if (const auto* s = categorical(r, p.field)) {
    const auto* v = std::get_if<std::string>(&p.lo);
    if (!v) return false;
    if (p.op == PredicateOp::eq) return *s == *v;
    const auto* hi = std::get_if<std::string>(&p.hi);
    return hi && *v <= *s && *s <= *hi;
  }
  if (p.field == "date_code") {
    const auto* lo = std::get_if<std::string>(&p.lo);
    if (!lo) return false;
    const Date a = parse_date(*lo);
    if (p.op == PredicateOp::eq) return r.date_code == a;
    const auto* hi = std::get_if<std::string>(&p.hi);
    return hi && a <= r.date_code && r.date_code <= parse_date(*hi);
  }
  const auto x = numeric(r, p.field);
  const auto* lo = std::get_if<double>(&p.lo);
  if (!x || !lo) return false;
  if (p.op == PredicateOp::eq) return *x == *lo;
  const auto* hi = std::get_if<double>(&p.hi);
  return hi && *lo <= *x && *x <= *hi;
}

TransactionRecord project_record(const TransactionRecord& r, const std::vector<std::string>& projection) {
  TransactionRecord out;
  for (const auto& f : projection) {
    if (f == "city") out.city = r.city;
    else if (f == "block") out.block = r.block;
    else if (f == "project") out.project = r.project;
    else if (f == "date_code") out.date_code = r.date_code;
    else if (f == "supply_sets") out.supply_sets = r.supply_sets;
    else if (f == "trade_sets") out.trade_sets = r.trade_sets;
    else if (f == "dim_area") out.dim_area = r.dim_area;
    else if (f == "dim_price") out.dim_price = r.dim_price;
    else if (f == "dim_unit_price") out.dim_unit_price = r.dim_unit_price;
  }
  return out;
}

void validate_query(const QuerySpec& spec) {
  if (spec.projection.empty()) throw Error(ErrorKind::EmptyProjection, "query projects no field");
  for (const auto& f : spec.projection) {
    if (!is_schema_field(f)) throw Error(ErrorKind::UnknownField, f);
  }
  for (const auto& p : spec.predicates) {
    if (!is_schema_field(p.field)) throw Error(ErrorKind::UnknownField, p.field);
    const bool wants_string = categorical(TransactionRecord{}, p.field) != nullptr || p.field == "date_code";
    auto ok = [&](const SqlValue& v) { return std::holds_alternative<std::string>(v) == wants_string; };
    if (!ok(p.lo) || (p.op == PredicateOp::between && !ok(p.hi))) {
      throw Error(ErrorKind::SchemaViolation, "value type does not fit field " + p.field);
    }
    if (p.field == "date_code") {
      parse_date(std::get<std::string>(p.lo));
      if (p.op == PredicateOp::between) parse_date(std::get<std::string>(p.hi));
    }
  }
}

Store::Store(const std::vector<TaggedRecord>& records) {
  for (const auto& t : records) tables_[t.table_name].push_back(t.record);
  for (auto& [name, rows] : tables_) {
    std::stable_sort(rows.begin(), rows.end(), row_order);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      block_index_[index_key(name, rows[i].city, rows[i].block)].push_back(i);
    }
  }
}

bool Store::has_table(std::string_view name) const { return tables_.find(name) != tables_.end(); }

std::vector<std::string> Store::table_names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : tables_) out.push_back(k);
  return out;
}

const std::vector<TransactionRecord>& Store::table(std::string_view name) const {
  auto it = tables_.find(name);
  if (it == tables_.end()) throw Error(ErrorKind::UnknownTable, std::string(name));
  return it->second;
}

std::vector<std::string> Store::cities(std::string_view table) const {
  std::set<std::string> s;
  for (const auto& r : this->table(table)) s.insert(r.city);
  return {s.begin(), s.end()};
}

std::vector<std::string> Store::blocks(std::string_view table, std::string_view city) const {
  std::set<std::string> s;
  for (const auto& r : this->table(table)) {
    if (r.city == city) s.insert(r.block);
  }
  return {s.begin(), s.end()};
}

std::vector<std::string> Store::projects(std::string_view table, std::string_view city,
                                         std::string_view block) const {
  std::set<std::string> s;
  const auto& rows = this->table(table);
  auto it = block_index_.find(index_key(table, city, block));
  if (it == block_index_.end()) return {};
  for (auto i : it->second) s.insert(rows[i].project);
  return {s.begin(), s.end()};
}

std::size_t Store::size() const {
  std::size_t n = 0;
  for (const auto& [k, v] : tables_) n += v.size();
  return n;
}

QueryResult Store::execute(const QuerySpec& spec) const {
  validate_query(spec);
  const auto& rows = table(spec.table_name);
  const std::string* city = nullptr;
  const std::string* block = nullptr;
  for (const auto& p : spec.predicates) {
    if (p.op != PredicateOp::eq) continue;
    if (p.field == "city") city = &std::get<std::string>(p.lo);
    if (p.field == "block") block = &std::get<std::string>(p.lo);
  }
  QueryResult out;
  out.projection = spec.projection;
  auto take = [&](const TransactionRecord& r) {
    for (const auto& p : spec.predicates) {
      if (!matches(r, p)) return;
    }
    out.rows.push_back(project_record(r, spec.projection));
  };
  if (city && block) {
    auto it = block_index_.find(index_key(spec.table_name, *city, *block));
    if (it != block_index_.end()) {
      for (auto i : it->second) take(rows[i]);
    }
  } else {
    for (const auto& r : rows) take(r);
  }
  return out;
}

std::vector<TaggedRecord> Store::all_records() const {
  std::vector<TaggedRecord> out;
  for (const auto& [name, rows] : tables_) {
    for (const auto& r : rows) out.push_back({name, r});
  }
  return out;
}

QueryResult execute_query(const Store& store, const QuerySpec& spec) { return store.execute(spec); }

// ---------------------------------------------------------------------------
// Dumps

std::string to_ndjson(const std::vector<TaggedRecord>& records) {
  std::string out;
  for (const auto& t : records) {
    Json j = to_json(t.record);
    j["table"] = t.table_name;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<TaggedRecord> from_ndjson(std::string_view text) {
  std::vector<TaggedRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const Json j = parse_json_text(line);
    if (!j.is_object() || !j.contains("table") || !j.at("table").is_string()) {
      throw Error(ErrorKind::SchemaViolation, "line " + std::to_string(line_no) + " lacks a table name");
    }
    out.push_back({j.at("table").get<std::string>(), record_from_json(j)});
  }
  return out;
}

std::string to_sql_script(const std::vector<TaggedRecord>& records) {
  std::map<std::string, std::vector<const TransactionRecord*>> by_table;
  for (const auto& t : records) by_table[t.table_name].push_back(&t.record);
  std::ostringstream out;
  for (const auto& [name, rows] : by_table) {
    out << "CREATE TABLE " << name
        << " (\n  city TEXT NOT NULL,\n  block TEXT NOT NULL,\n  project TEXT NOT NULL,\n"
           "  date_code DATE NOT NULL,\n  supply_sets INTEGER NOT NULL,\n  trade_sets INTEGER NOT NULL,\n"
           "  dim_area DOUBLE PRECISION NOT NULL,\n  dim_price DOUBLE PRECISION NOT NULL,\n"
           "  dim_unit_price DOUBLE PRECISION NOT NULL\n);\n";
    out << "CREATE INDEX " << name << "_city_block ON " << name << " (city, block);\n";
    out << "COPY " << name
        << " (city, block, project, date_code, supply_sets, trade_sets, dim_area, dim_price, dim_unit_price)"
           " FROM stdin;\n";
    for (const auto* r : rows) {
      out << r->city << '\t' << r->block << '\t' << r->project << '\t' << format_date(r->date_code) << '\t'
          << r->supply_sets << '\t' << r->trade_sets << '\t' << format_number(r->dim_area) << '\t'
          << format_number(r->dim_price) << '\t' << format_number(r->dim_unit_price) << '\n';
    }
    out << "\\.\n\n";
  }
  return out.str();
}

}  // namespace dynaslide
