#include "dynaslide/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

namespace dynaslide {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::NonPositive: return "NonPositive";
    case ErrorKind::DateOutOfWindow: return "DateOutOfWindow";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::UnknownTable: return "UnknownTable";
    case ErrorKind::UnknownField: return "UnknownField";
    case ErrorKind::EmptyProjection: return "EmptyProjection";
    case ErrorKind::UnknownVariable: return "UnknownVariable";
    case ErrorKind::UnboundVariable: return "UnboundVariable";
    case ErrorKind::UnknownFunction: return "UnknownFunction";
    case ErrorKind::UnknownMetric: return "UnknownMetric";
    case ErrorKind::UnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorKind::InvalidBounds: return "InvalidBounds";
    case ErrorKind::UnknownOp: return "UnknownOp";
    case ErrorKind::MismatchedFieldOps: return "MismatchedFieldOps";
    case ErrorKind::MissingKey: return "MissingKey";
    case ErrorKind::InvalidParam: return "InvalidParam";
    case ErrorKind::InsufficientColumns: return "InsufficientColumns";
    case ErrorKind::UnknownSubtemplate: return "UnknownSubtemplate";
    case ErrorKind::RoleMismatch: return "RoleMismatch";
    case ErrorKind::SlotOccupied: return "SlotOccupied";
    case ErrorKind::EmptySeries: return "EmptySeries";
    case ErrorKind::UnknownRole: return "UnknownRole";
    case ErrorKind::DegenerateRect: return "DegenerateRect";
    case ErrorKind::ProviderError: return "ProviderError";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::NoApplicableTemplate: return "NoApplicableTemplate";
    case ErrorKind::ConflictingTable: return "ConflictingTable";
    case ErrorKind::InsufficientSubtemplates: return "InsufficientSubtemplates";
    case ErrorKind::TooFewSubtemplates: return "TooFewSubtemplates";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::IncompleteTrace: return "IncompleteTrace";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, std::string detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind),
      detail_(std::move(detail)) {}

// ---------------------------------------------------------------------------
// Dates

Date make_date(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

namespace {

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) {
    throw Error(ErrorKind::ParseError, "bad " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorKind::ParseError, "date must be YYYY-MM-DD: '" + std::string(text) + "'");
  }
  const int y = parse_int(text.substr(0, 4), "year");
  const int m = parse_int(text.substr(5, 2), "month");
  const int d = parse_int(text.substr(8, 2), "day");
  Date out = make_date(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
  if (!out.ok()) throw Error(ErrorKind::ParseError, "invalid date '" + std::string(text) + "'");
  return out;
}

int month_ordinal(Date d) {
  return static_cast<int>(d.year()) * 12 + static_cast<int>(static_cast<unsigned>(d.month())) - 1;
}

std::string format_month(int ordinal) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", ordinal / 12, ordinal % 12 + 1);
  return buf;
}

int parse_month(std::string_view text) {
  if (text.size() != 7 || text[4] != '-') {
    throw Error(ErrorKind::ParseError, "month must be YYYY-MM: '" + std::string(text) + "'");
  }
  const int y = parse_int(text.substr(0, 4), "year");
  const int m = parse_int(text.substr(5, 2), "month");
  if (m < 1 || m > 12) throw Error(ErrorKind::ParseError, "month out of range: '" + std::string(text) + "'");
  return y * 12 + m - 1;
}

Date first_day_of_month(int ordinal) {
  return make_date(ordinal / 12, static_cast<unsigned>(ordinal % 12 + 1), 1);
}

Date last_day_of_month(int ordinal) {
  using namespace std::chrono;
  const year_month_day_last last{year{ordinal / 12} / month{static_cast<unsigned>(ordinal % 12 + 1)} / std::chrono::last};
  return Date{last};
}

// ---------------------------------------------------------------------------
// Records

bool is_schema_field(std::string_view name) {
  return std::find(kSchemaFields.begin(), kSchemaFields.end(), name) != kSchemaFields.end();
}

DateWindow default_window() { return {make_date(2020, 1, 1), make_date(2024, 12, 31)}; }

TransactionRecord validate_record(const TransactionRecord& r, const DateWindow& window) {
  if (r.city.empty()) throw Error(ErrorKind::MissingField, "city");
  if (r.block.empty()) throw Error(ErrorKind::MissingField, "block");
  if (r.project.empty()) throw Error(ErrorKind::MissingField, "project");
  if (!r.date_code.ok()) throw Error(ErrorKind::MissingField, "date_code");
  if (r.supply_sets < 0) throw Error(ErrorKind::NonPositive, "supply_sets");
  if (r.trade_sets < 0) throw Error(ErrorKind::NonPositive, "trade_sets");
  if (!(r.dim_area > 0.0) || !std::isfinite(r.dim_area)) throw Error(ErrorKind::NonPositive, "dim_area");
  if (!(r.dim_price > 0.0) || !std::isfinite(r.dim_price)) throw Error(ErrorKind::NonPositive, "dim_price");
  if (!(r.dim_unit_price > 0.0) || !std::isfinite(r.dim_unit_price)) {
    throw Error(ErrorKind::NonPositive, "dim_unit_price");
  }
  if (!window.contains(r.date_code)) throw Error(ErrorKind::DateOutOfWindow, format_date(r.date_code));
  return r;
}

// ---------------------------------------------------------------------------
// Rounding

namespace {

// Half-away-from-zero rounding on the decimal rendering of |value|. Six guard
// digits absorb binary representation error (0.15 rounds to 0.2).
double round_decimal(double value, int places) {
  if (!std::isfinite(value)) throw Error(ErrorKind::NonFinite, "cannot round a non-finite value");
  const bool negative = value < 0;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.*f", places + 6, std::fabs(value));
  std::string s(buf);
  const auto dot = s.find('.');
  std::string digits = s.substr(0, dot) + s.substr(dot + 1, static_cast<std::size_t>(places));
  const char next = s[dot + 1 + static_cast<std::size_t>(places)];
  if (next >= '5') {
    int i = static_cast<int>(digits.size()) - 1;
    while (i >= 0) {
      if (digits[static_cast<std::size_t>(i)] == '9') {
        digits[static_cast<std::size_t>(i)] = '0';
        --i;
      } else {
        ++digits[static_cast<std::size_t>(i)];
        break;
      }
    }
    if (i < 0) digits.insert(digits.begin(), '1');
  }
  std::string out = digits;
  if (places > 0) out.insert(out.size() - static_cast<std::size_t>(places), ".");
  double r = std::strtod(out.c_str(), nullptr);
  if (r == 0.0) return 0.0;
  return negative ? -r : r;
}

}  // namespace

double canonical_round(double value, RoundKind kind) {
  if (!std::isfinite(value)) throw Error(ErrorKind::NonFinite, "cannot round a non-finite value");
  switch (kind) {
    case RoundKind::percent: return round_decimal(value * 100.0, 1);
    case RoundKind::price: return round_decimal(value, 1);
    case RoundKind::count: return round_decimal(value, 0);
  }
  return value;
}

std::string format_rounded(double value, RoundKind kind) {
  const double r = canonical_round(value, kind);
  char buf[64];
  std::snprintf(buf, sizeof buf, kind == RoundKind::count ? "%.0f" : "%.1f", r);
  std::string s(buf);
  if (s == "-0.0" || s == "-0") s.erase(0, 1);
  return s;
}

std::string format_number(double value) {
  if (!std::isfinite(value)) throw Error(ErrorKind::NonFinite, "cannot format a non-finite value");
  if (value == 0.0) return "0";
  char buf[128];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
  return std::string(buf, p);
}

// ---------------------------------------------------------------------------
// Enum names

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& names,
             std::string_view what) {
  for (const auto& [name, v] : names) {
    if (name == s) return v;
  }
  throw Error(ErrorKind::ParseError, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, ElementType>, 3> kElementTypes{
    {{"textBox", ElementType::textBox}, {"table", ElementType::table}, {"chart", ElementType::chart}}};
constexpr std::array<std::pair<std::string_view, Role>, 6> kRoles{{{"title", Role::title},
                                                                   {"caption", Role::caption},
                                                                   {"table_body", Role::table_body},
                                                                   {"chart_body", Role::chart_body},
                                                                   {"summary", Role::summary},
                                                                   {"unlabeled", Role::unlabeled}}};
constexpr std::array<std::pair<std::string_view, Structure>, 3> kStructures{
    {{"FC", Structure::FC}, {"CF", Structure::CF}, {"XC", Structure::XC}}};
constexpr std::array<std::pair<std::string_view, Aggregation>, 3> kAggregations{
    {{"SUM", Aggregation::SUM}, {"AVG", Aggregation::AVG}, {"COUNT", Aggregation::COUNT}}};
constexpr std::array<std::pair<std::string_view, ChartType>, 2> kChartTypes{
    {{"bar", ChartType::bar}, {"line", ChartType::line}}};

template <typename E, std::size_t N>
std::string_view name_of(E v, const std::array<std::pair<std::string_view, E>, N>& names) {
  for (const auto& [name, e] : names) {
    if (e == v) return name;
  }
  return "?";
}

}  // namespace

std::string_view to_string(ElementType v) { return name_of(v, kElementTypes); }
std::string_view to_string(Role v) { return name_of(v, kRoles); }
std::string_view to_string(Structure v) { return name_of(v, kStructures); }
std::string_view to_string(Aggregation v) { return name_of(v, kAggregations); }
std::string_view to_string(ChartType v) { return name_of(v, kChartTypes); }
ElementType parse_element_type(std::string_view s) { return parse_enum(s, kElementTypes, "element type"); }
Role parse_role(std::string_view s) { return parse_enum(s, kRoles, "role"); }
Structure parse_structure(std::string_view s) { return parse_enum(s, kStructures, "structure"); }
Aggregation parse_aggregation(std::string_view s) { return parse_enum(s, kAggregations, "aggregation"); }
ChartType parse_chart_type(std::string_view s) { return parse_enum(s, kChartTypes, "chart type"); }

// ---------------------------------------------------------------------------
// Slide validation

void validate_table(const AnalyticalTable& t) {
  if (t.cells.size() != t.rows()) {
    throw Error(ErrorKind::SchemaViolation, "table has " + std::to_string(t.cells.size()) +
                                                " cell rows for " + std::to_string(t.rows()) + " headers");
  }
  for (const auto& row : t.cells) {
    if (row.size() != t.cols()) throw Error(ErrorKind::SchemaViolation, "table row width mismatch");
    for (const auto& c : row) {
      if (c && !std::isfinite(*c)) throw Error(ErrorKind::NonFinite, "table cell");
    }
  }
  if (!t.row_canon.empty() && t.row_canon.size() != t.rows()) {
    throw Error(ErrorKind::SchemaViolation, "row_canon length mismatch");
  }
  if (!t.col_canon.empty() && t.col_canon.size() != t.cols()) {
    throw Error(ErrorKind::SchemaViolation, "col_canon length mismatch");
  }
}

void validate_chart(const ChartSpec& c) {
  for (const auto& s : c.series) {
    if (s.values.size() != c.categories.size()) {
      throw Error(ErrorKind::SchemaViolation, "series '" + s.name + "' length differs from categories");
    }
    for (const auto& v : s.values) {
      if (v && !std::isfinite(*v)) throw Error(ErrorKind::NonFinite, "chart value");
    }
  }
}

void validate_element(const SlideElement& e) {
  if (e.id.empty()) throw Error(ErrorKind::MissingField, "element id");
  if (e.layout.width <= 0 || e.layout.height <= 0) {
    throw Error(ErrorKind::SchemaViolation, "element '" + e.id + "' has a non-positive size");
  }
  if (e.role == Role::table_body) {
    const auto* t = std::get_if<AnalyticalTable>(&e.payload);
    if (!t) throw Error(ErrorKind::SchemaViolation, "table_body '" + e.id + "' lacks a table payload");
    validate_table(*t);
  } else if (e.role == Role::chart_body) {
    const auto* c = std::get_if<ChartSpec>(&e.payload);
    if (!c) throw Error(ErrorKind::SchemaViolation, "chart_body '" + e.id + "' lacks a chart payload");
    validate_chart(*c);
  }
}

void validate_slide(const SlideDocument& s) {
  if (s.theme_id < 1 || s.theme_id > 6) throw Error(ErrorKind::SchemaViolation, "theme_id out of range");
  if (s.subtemplate_id < 1 || s.subtemplate_id > 34) {
    throw Error(ErrorKind::SchemaViolation, "subtemplate_id out of range");
  }
  std::set<std::string> ids;
  int titles = 0, captions = 0, bodies = 0, summaries = 0;
  for (const auto& e : s.elements) {
    validate_element(e);
    if (!ids.insert(e.id).second) throw Error(ErrorKind::SchemaViolation, "duplicate element id '" + e.id + "'");
    switch (e.role) {
      case Role::title: ++titles; break;
      case Role::caption: ++captions; break;
      case Role::table_body:
      case Role::chart_body: ++bodies; break;
      case Role::summary: ++summaries; break;
      case Role::unlabeled: break;
    }
  }
  if (titles != 1) throw Error(ErrorKind::SchemaViolation, "slide needs exactly one title");
  if (captions < 1) throw Error(ErrorKind::SchemaViolation, "slide needs at least one caption");
  if (bodies < 1) throw Error(ErrorKind::SchemaViolation, "slide needs a table or chart");
  if (summaries != 1) throw Error(ErrorKind::SchemaViolation, "slide needs exactly one summary");
}

const SlideElement* SlideDocument::find_role(Role role) const {
  for (const auto& e : elements) {
    if (e.role == role) return &e;
  }
  return nullptr;
}

const AnalyticalTable* SlideDocument::table() const {
  const auto* e = find_role(Role::table_body);
  return e ? std::get_if<AnalyticalTable>(&e->payload) : nullptr;
}

const ChartSpec* SlideDocument::chart() const {
  const auto* e = find_role(Role::chart_body);
  return e ? std::get_if<ChartSpec>(&e->payload) : nullptr;
}

// ---------------------------------------------------------------------------
// Open logic

namespace {

bool is_constraint_field(std::string_view k) {
  return is_schema_field(k) || k == "year" || k == "month" || k == "price_m";
}

}  // namespace

std::optional<double> constraint_bound(const ConstraintValue& v, std::string_view field) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* s = std::get_if<std::string>(&v)) {
    // Month bounds travel as "YYYY-MM" strings.
    if (field == "month") return static_cast<double>(parse_month(*s));
    char* end = nullptr;
    const double d = std::strtod(s->c_str(), &end);
    if (!s->empty() && end == s->c_str() + s->size()) return d;
  }
  return std::nullopt;
}

void validate_open_logic(const OpenLogic& logic) {
  if (logic.fields.size() != logic.ops.size()) {
    throw Error(ErrorKind::MismatchedFieldOps, std::to_string(logic.fields.size()) + " fields vs " +
                                                   std::to_string(logic.ops.size()) + " operations");
  }
  if (logic.fields.empty()) throw Error(ErrorKind::EmptyProjection, "open logic names no source field");
  for (const auto& f : logic.fields) {
    if (!is_schema_field(f)) throw Error(ErrorKind::UnknownField, f);
  }
  for (const auto& k : logic.row_keys) {
    if (!is_constraint_field(k)) throw Error(ErrorKind::UnknownField, k);
  }
  for (const auto& k : logic.col_keys) {
    if (!is_constraint_field(k)) throw Error(ErrorKind::UnknownField, k);
  }
  switch (logic.structure) {
    case Structure::XC:
      if (logic.row_keys.empty() || logic.col_keys.empty()) {
        throw Error(ErrorKind::MissingKey, "XC needs row and column keys");
      }
      break;
    case Structure::CF:
      if (logic.row_keys.empty()) throw Error(ErrorKind::MissingKey, "CF needs row keys");
      break;
    case Structure::FC:
      if (logic.col_keys.empty()) throw Error(ErrorKind::MissingKey, "FC needs column keys");
      break;
  }
  for (const auto& c : logic.constraints) {
    if (!is_constraint_field(c.field)) throw Error(ErrorKind::UnknownField, c.field);
    if (c.op_template == "=" || c.op_template == "!=" || c.op_template == "<" || c.op_template == "<=" ||
        c.op_template == ">" || c.op_template == ">=") {
      continue;
    }
    const auto lo = constraint_bound(c.start, c.field);
    const auto hi = constraint_bound(c.end, c.field);
    if (!lo || !hi || !(*lo < *hi)) throw Error(ErrorKind::InvalidBounds, "binning on " + c.field);
    if (const auto* step = std::get_if<double>(&c.step); step && !(*step > 0.0 && std::isfinite(*step))) {
      throw Error(ErrorKind::InvalidBounds, "non-positive step on " + c.field);
    }
  }
}

}  // namespace dynaslide
