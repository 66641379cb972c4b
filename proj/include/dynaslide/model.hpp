#pragma once

// Domain types shared across the engine: transaction records, slide
// documents, filter sets, parameter states and computed tables.

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dynaslide/error.hpp"

namespace dynaslide {

using Date = std::chrono::year_month_day;

std::string format_date(Date d);
Date parse_date(std::string_view text);
Date make_date(int y, unsigned m, unsigned d);
// Months since year 0; used for month binning and "YYYY-MM" labels.
int month_ordinal(Date d);
std::string format_month(int ordinal);
int parse_month(std::string_view text);  // "YYYY-MM" -> ordinal
Date first_day_of_month(int ordinal);
Date last_day_of_month(int ordinal);

// ---------------------------------------------------------------------------
// Transaction records

inline constexpr std::array<std::string_view, 9> kSchemaFields = {
    "city",     "block",      "project",   "date_code",     "supply_sets",
    "trade_sets", "dim_area", "dim_price", "dim_unit_price"};

bool is_schema_field(std::string_view name);

struct TransactionRecord {
  std::string city;
  std::string block;
  std::string project;
  Date date_code{};
  std::int64_t supply_sets = 0;
  std::int64_t trade_sets = 0;
  double dim_area = 0.0;        // m²
  double dim_price = 0.0;       // 10⁴ CNY
  double dim_unit_price = 0.0;  // CNY / m²

  bool operator==(const TransactionRecord&) const = default;
};

struct DateWindow {
  Date first;
  Date last;  // inclusive
  bool contains(Date d) const { return first <= d && d <= last; }
};

DateWindow default_window();

// Returns the record unchanged when every invariant holds.
// Throws MissingField / NonPositive / DateOutOfWindow.
TransactionRecord validate_record(const TransactionRecord& r,
                                  const DateWindow& window = default_window());

// ---------------------------------------------------------------------------
// Numeric formatting

enum class RoundKind { percent, price, count };

// percent: ratio -> percentage points, one decimal, half away from zero.
// price: one decimal. count: integer.
double canonical_round(double value, RoundKind kind);
// Rounds then renders ("62.1", "1355").
std::string format_rounded(double value, RoundKind kind);
// Shortest fixed-notation rendering that round-trips ("50", "0.75").
std::string format_number(double value);

// ---------------------------------------------------------------------------
// Slides

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  bool operator==(const Rect&) const = default;
};

inline constexpr int kCanvasWidth = 1280;
inline constexpr int kCanvasHeight = 720;

enum class ElementType { textBox, table, chart };
enum class Role { title, caption, table_body, chart_body, summary, unlabeled };
enum class Structure { FC, CF, XC };
enum class Aggregation { SUM, AVG, COUNT };
enum class ChartType { bar, line };

std::string_view to_string(ElementType v);
std::string_view to_string(Role v);
std::string_view to_string(Structure v);
std::string_view to_string(Aggregation v);
std::string_view to_string(ChartType v);
ElementType parse_element_type(std::string_view s);
Role parse_role(std::string_view s);
Structure parse_structure(std::string_view s);
Aggregation parse_aggregation(std::string_view s);
ChartType parse_chart_type(std::string_view s);

// A missing value: AVG over an empty group.
using Cell = std::optional<double>;
inline constexpr std::string_view kNullMarker = "—";

struct AnalyticalTable {
  Structure structure = Structure::CF;
  std::string index_header;  // title of the row-header column
  std::string index_canon;   // canonical id behind index_header, may be empty
  std::vector<std::string> row_headers;
  std::vector<std::string> col_headers;
  // Canonical metric ids parallel to the headers; empty when the headers are
  // constraint values rather than metrics.
  std::vector<std::string> row_canon;
  std::vector<std::string> col_canon;
  std::vector<std::vector<Cell>> cells;

  std::size_t rows() const { return row_headers.size(); }
  std::size_t cols() const { return col_headers.size(); }
  bool operator==(const AnalyticalTable&) const = default;
};

void validate_table(const AnalyticalTable& t);

struct Series {
  std::string name;
  std::vector<Cell> values;
  bool operator==(const Series&) const = default;
};

struct ChartSpec {
  ChartType chart_type = ChartType::bar;
  std::vector<std::string> categories;
  std::vector<Series> series;
  bool operator==(const ChartSpec&) const = default;
};

void validate_chart(const ChartSpec& c);

using Payload = std::variant<std::monostate, AnalyticalTable, ChartSpec>;

struct SlideElement {
  std::string id;
  ElementType type = ElementType::textBox;
  Role role = Role::unlabeled;
  std::string text;
  Rect layout;
  Payload payload;
  bool operator==(const SlideElement&) const = default;
};

struct SlideDocument {
  int theme_id = 1;
  int subtemplate_id = 1;
  std::vector<SlideElement> elements;
  bool operator==(const SlideDocument&) const = default;

  const SlideElement* find_role(Role role) const;
  const AnalyticalTable* table() const;
  const ChartSpec* chart() const;
};

void validate_element(const SlideElement& e);
// One title, >=1 caption, >=1 table/chart body, one summary, unique ids.
void validate_slide(const SlideDocument& s);

// ---------------------------------------------------------------------------
// Filter sets and metadata

struct FilterSet {
  std::optional<std::string> table_name;
  std::optional<std::string> function_id;
  std::map<std::string, std::string> variables;
  std::map<std::string, double> params;

  bool empty() const {
    return !table_name && !function_id && variables.empty() && params.empty();
  }
  bool operator==(const FilterSet&) const = default;
};

struct TemplateSlot {
  Role role = Role::title;
  Rect layout;
  std::string template_id;  // empty for table/chart bodies
  std::optional<ChartType> chart_type;
  bool operator==(const TemplateSlot&) const = default;
};

struct SlideMetadata {
  FilterSet slide_filters;
  std::vector<TemplateSlot> template_slide;
  std::map<std::string, std::string> header_aliases;  // canonical id -> alias
  std::optional<FilterSet> query_filters;
  std::optional<FilterSet> update_filters;
  std::optional<std::string> output_slide;
  bool operator==(const SlideMetadata&) const = default;
};

// ---------------------------------------------------------------------------
// Parameter state

struct DateRange {
  Date from;
  Date to;  // inclusive
  bool operator==(const DateRange&) const = default;
};

struct NumRange {
  double min = 0.0;
  double max = 0.0;
  bool operator==(const NumRange&) const = default;
};

// One optional constraint per schema field.
struct Slots {
  std::optional<std::string> city;
  std::optional<std::string> block;
  std::optional<std::string> project;
  std::optional<DateRange> date_code;
  std::optional<NumRange> supply_sets;
  std::optional<NumRange> trade_sets;
  std::optional<NumRange> dim_area;
  std::optional<NumRange> dim_price;
  std::optional<NumRange> dim_unit_price;
  bool operator==(const Slots&) const = default;
};

using ConstraintValue = std::variant<std::monostate, double, std::string>;
using StepValue = std::variant<double, std::string>;  // value or parameter name

struct ConstraintSpec {
  std::string field;        // k: schema field or derived year / month / price_m
  std::string op_template;  // T: "-", "{}-{}M", "{}", "="
  ConstraintValue start;
  ConstraintValue end;
  StepValue step = 0.0;
  bool operator==(const ConstraintSpec&) const = default;
};

struct OpenLogic {
  Structure structure = Structure::CF;
  std::vector<std::string> row_keys;
  std::vector<std::string> col_keys;
  std::vector<ConstraintSpec> constraints;
  std::vector<std::string> fields;
  std::vector<Aggregation> ops;
  bool operator==(const OpenLogic&) const = default;
};

struct ClosedCall {
  std::string function_id;
  std::map<std::string, double> params;
  bool operator==(const ClosedCall&) const = default;
};

using Logic = std::variant<ClosedCall, OpenLogic>;

struct ParameterState {
  std::string table_name;
  Slots slots;
  Logic logic;
  bool operator==(const ParameterState&) const = default;
};

// Numeric value of a binning bound; month bounds may be "YYYY-MM" strings.
std::optional<double> constraint_bound(const ConstraintValue& v, std::string_view field);

// Throws MismatchedFieldOps when |F| != |O|, InvalidBounds for an empty
// binned range, UnknownField / MissingKey for malformed headers.
void validate_open_logic(const OpenLogic& logic);

}  // namespace dynaslide
