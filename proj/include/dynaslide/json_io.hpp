#pragma once

// JSON forms of the core types. Every top-level document carries
// "format_version": 1. Parsers are strict: missing keys, extra keys and
// wrong types raise Error(SchemaViolation).

#include <nlohmann/json.hpp>

#include "dynaslide/model.hpp"

namespace dynaslide {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

Json to_json(const TransactionRecord& r);
TransactionRecord record_from_json(const Json& j);

Json to_json(const Rect& r);
Rect rect_from_json(const Json& j);

Json to_json(const AnalyticalTable& t);
AnalyticalTable table_from_json(const Json& j);

Json to_json(const ChartSpec& c);
ChartSpec chart_from_json(const Json& j);

Json to_json(const SlideElement& e);
SlideElement element_from_json(const Json& j);

Json to_json(const SlideDocument& s);
SlideDocument slide_from_json(const Json& j);

Json to_json(const FilterSet& f);
FilterSet filters_from_json(const Json& j);

Json to_json(const TemplateSlot& s);
TemplateSlot slot_from_json(const Json& j);

Json to_json(const SlideMetadata& m);
SlideMetadata metadata_from_json(const Json& j);

Json to_json(const OpenLogic& l);
OpenLogic open_logic_from_json(const Json& j);

Json to_json(const Logic& l);
Logic logic_from_json(const Json& j);

Json to_json(const Slots& s);
Slots slots_from_json(const Json& j);

Json to_json(const ParameterState& p);
ParameterState parameter_state_from_json(const Json& j);

// Stable text form used for digests and byte-identity checks.
std::string canonical_dump(const Json& j);

Json parse_json_text(std::string_view text);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);
std::string read_text_file(const std::string& path);

}  // namespace dynaslide
