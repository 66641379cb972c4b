#pragma once

// Split-apply-combine table synthesis over transaction records, the shipped
// closed-domain function registry (F1..F11) and summary-metric extraction.

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dynaslide/model.hpp"

namespace dynaslide {

// ---------------------------------------------------------------------------
// Field access. Derived fields: year, month (ordinal, "YYYY-MM"), price_m
// (dim_price / 100, million CNY).

bool is_derived_field(std::string_view k);
bool is_categorical_field(std::string_view k);
// Schema column a (possibly derived) field is computed from.
std::string source_column(std::string_view k);
// Numeric value of a field; nullopt for categorical fields. UnknownField.
std::optional<double> numeric_value(const TransactionRecord& r, std::string_view k);
// Display value used as a group key ("2021", "2021-03", "Chaoyang").
std::string key_text(const TransactionRecord& r, std::string_view k);

// ---------------------------------------------------------------------------
// Algorithm steps

struct Bin {
  double lo = 0.0;
  double hi = 0.0;  // exclusive
  std::string label;
};

// Half-open bins tiling [start, end); the last bin is clipped at end.
// T: "-" is shorthand for "{}-{}"; each "{}" takes lo then hi.
std::vector<Bin> make_bins(std::string_view field, double start, double end, double step, std::string_view T);
std::string format_bound(std::string_view field, double v);
// Index of the bin holding v, or nullopt when v is outside [start, end).
std::optional<std::size_t> bin_index(const std::vector<Bin>& bins, double v);

struct Row {
  TransactionRecord record;
  std::map<std::string, std::string> tags;  // binned field -> bin label
};

std::vector<Row> to_rows(const std::vector<TransactionRecord>& records);

std::vector<Row> apply_binning(const std::vector<Row>& rows, std::string_view field, double start, double end,
                               double step, std::string_view T);
// T in {=, !=, <, <=, >, >=}. UnknownField / UnknownOp.
std::vector<Row> apply_filter(const std::vector<Row>& rows, std::string_view k, std::string_view T,
                              const ConstraintValue& v);

struct GroupedRow {
  std::vector<std::string> key;
  std::vector<Cell> values;
};

struct Grouped {
  std::vector<std::string> keys;
  std::vector<std::string> metric_labels;  // "SUM(trade_sets)"
  std::vector<Aggregation> ops;
  std::vector<GroupedRow> rows;  // first-appearance order
};

std::string metric_label(std::string_view field, Aggregation op);

// MismatchedFieldOps when |F| != |O|.
Grouped group_aggregate(const std::vector<Row>& rows, const std::vector<std::string>& keys,
                        const std::vector<std::string>& fields, const std::vector<Aggregation>& ops);

// Ordered header values per key. Binned keys list every bin so empty bins
// appear; other keys list the distinct values present, sorted.
using Domains = std::map<std::string, std::vector<std::string>>;

// MissingKey when a header key is absent from the grouping.
AnalyticalTable reshape_table(const Grouped& g, Structure S, const std::vector<std::string>& row_keys,
                              const std::vector<std::string>& col_keys, const Domains& domains);

// Swaps rows and columns (headers, canon ids and cells); FC <-> CF.
AnalyticalTable transpose(const AnalyticalTable& t);

// Steps given as parameter names are resolved from params (InvalidParam).
AnalyticalTable synthesize_analytical_table(const std::vector<TransactionRecord>& raw, const OpenLogic& logic,
                                            const std::map<std::string, double>& params = {});

// ---------------------------------------------------------------------------
// Closed-domain functions

enum class Scope { block, city };
enum class Period { yearly, monthly };

struct FunctionInfo {
  std::string id;
  std::string name;
  Structure structure;
  Scope scope;
  Period period;
  std::vector<std::string> params;        // parameter names
  std::vector<std::string> metric_canon;  // canonical ids of the metric axis
  std::string index_canon;                // alias-bearing index header, or ""
  std::string index_label;                // fixed index header when index_canon is ""
  std::vector<std::string> summary_metrics;
};

const std::vector<FunctionInfo>& function_registry();
const FunctionInfo& function_info(std::string_view id);  // UnknownFunction
bool is_function_id(std::string_view id);

struct FunctionArgs {
  std::map<std::string, double> params;
  DateRange period;  // inclusive; years / months spanned define the time axis
};

// Candidate sets for the shipped parameters (same values as the default pack).
const std::map<std::string, std::vector<double>>& parameter_candidates();
// InvalidParam for unknown, missing or out-of-candidate values.
void validate_params(const FunctionInfo& f, const std::map<std::string, double>& params);

// The function's equivalent (S, H, C, F, O) tuple with numeric steps.
OpenLogic to_open_logic(const ClosedCall& call, const DateRange& period);

// Direct implementation of each function (not routed through synthesis).
AnalyticalTable run_statistical_function(std::string_view function_id, const std::vector<TransactionRecord>& raw,
                                         const FunctionArgs& args);

// Schema columns needed to evaluate a logic: source fields, then constraint
// columns, then header-key columns, de-duplicated.
std::vector<std::string> source_columns(const Logic& logic);

// Replaces raw headers with display labels: metric axis from aliases
// (canonical id -> alias, falling back to the canonical id), index header from
// the function's index alias or fixed label.
AnalyticalTable label_table(AnalyticalTable t, const FunctionInfo& f,
                            const std::map<std::string, std::string>& aliases);

// Copies display headers of the metric axis and index header from a table
// with the same shape (used when only the source slide's labels are known).
AnalyticalTable copy_header_labels(AnalyticalTable t, const AnalyticalTable& labeled);

ChartSpec chart_from_table(const AnalyticalTable& t, ChartType type);

// ---------------------------------------------------------------------------
// Summary metrics

struct MetricValue {
  std::variant<double, std::string> value;
  RoundKind kind = RoundKind::count;
  std::string render() const;
  bool operator==(const MetricValue&) const = default;
};

using SummaryMetrics = std::map<std::string, MetricValue>;

// (terminal - base) / base as a ratio; nullopt when base is missing or zero.
std::optional<double> change_ratio(Cell base, Cell terminal);
std::string trend_direction(Cell base, Cell terminal);  // Increasing / Decreasing / Flat / n/a

struct PeakCell {
  double value = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;
  std::string row_label;
  std::string col_label;
};
// First maximum in row-major order over non-null cells; nullopt when none.
std::optional<PeakCell> find_peak(const AnalyticalTable& t);

// InsufficientColumns when a trend metric sees fewer than 2 periods.
SummaryMetrics extract_summary_metrics(const AnalyticalTable& t, std::string_view function_id);

}  // namespace dynaslide
