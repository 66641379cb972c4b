#pragma once

// Bridges between filter sets (what slides and instructions carry) and
// parameter states (what the SQL and compute layers consume), plus the
// value bindings used to instantiate slide texts.

#include <map>
#include <string>
#include <vector>

#include "dynaslide/model.hpp"
#include "dynaslide/stats.hpp"
#include "dynaslide/templates.hpp"

namespace dynaslide {

enum class LogicMode { closed, open };
std::string_view to_string(LogicMode m);
LogicMode parse_logic_mode(std::string_view s);

// Filter-set variables of a function: city, block (block scope only) and
// start/end year or month.
std::vector<std::string> function_variables(const FunctionInfo& f);

// Inclusive date span named by start/end year or month variables.
// MissingKey when the pair is absent, InvalidBounds when start > end.
DateRange period_of(const FilterSet& f);

// MissingKey when table_name, function_id or a required variable is absent.
ParameterState state_from_filters(const FilterSet& f, LogicMode mode);

// Applies the keys of an instruction's delta to a state: table, scope slots,
// date bounds and parameters. An open logic's time constraint follows the
// new date range.
ParameterState apply_query_filters(ParameterState s, const FilterSet& delta);

// Binning parameters implied by a logic (closed params, or the steps of the
// dim_area / price_m constraints of an open tuple).
std::map<std::string, double> logic_params(const Logic& logic);

// Registry function whose equivalent tuple has the same shape (S, H, F, O,
// constraint fields and templates) as the open logic.
std::optional<std::string> infer_function_id(const OpenLogic& logic);
std::string function_id_of(const Logic& logic);  // UnknownFunction when none fits

// Every text value derivable from the state: field-mapping variables (through
// their derivations), market and parameters.
std::map<std::string, std::string> text_values(const TemplatePack& pack, const ParameterState& s);
void add_metric_values(std::map<std::string, std::string>& values, const SummaryMetrics& m);

// Placeholders of body that text_values can bind (used for applicability).
bool template_bindable(std::string_view body, const std::map<std::string, std::string>& values);

}  // namespace dynaslide
