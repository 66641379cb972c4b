#pragma once

// Template pack: the three dictionaries, themes, sub-template layouts and the
// title / caption / summary / instruction texts.

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dynaslide/json_io.hpp"
#include "dynaslide/model.hpp"

namespace dynaslide {

using Rng = std::mt19937_64;

struct FieldMapping {
  std::string source_column;
  std::string derivation;  // direct | year-of-date | month-of-date
};

enum class TemplateKind { title, caption, summary, instruction };
std::string_view to_string(TemplateKind k);

struct TextTemplate {
  std::string id;
  TemplateKind kind = TemplateKind::title;
  std::string body;
  std::optional<std::string> function_id;  // captions and summaries
  std::optional<int> theme_id;             // titles
  std::optional<std::string> scenario;     // instructions: basic | customized
};

struct Theme {
  int id = 0;
  std::string name;
  bool pack_defined = true;
  std::optional<std::string> market;  // fixed market, when the theme implies one
  std::vector<std::string> functions;
};

struct Subtemplate {
  int id = 0;
  int theme_id = 0;
  std::vector<TemplateSlot> slots;  // template_id left empty
};

struct TemplatePack {
  std::string pack_version;
  std::map<std::string, FieldMapping> field_mapping;
  std::map<std::string, std::vector<double>> parameter_candidates;
  std::map<std::string, std::vector<std::string>> header_aliases;
  std::vector<Theme> themes;
  std::vector<Subtemplate> subtemplates;
  std::vector<TextTemplate> templates;

  const Theme& theme(int id) const;              // UnknownSubtemplate
  const Subtemplate& subtemplate(int id) const;  // UnknownSubtemplate
  const TextTemplate& text_template(std::string_view id) const;  // NoApplicableTemplate
  std::vector<const TextTemplate*> titles(int theme_id) const;
  std::vector<const TextTemplate*> for_function(TemplateKind kind, std::string_view function_id) const;
  std::vector<const TextTemplate*> instructions(std::string_view scenario) const;
  std::vector<int> subtemplates_of(int theme_id) const;
};

// Reserved placeholder resolved from the table name ("new" / "resale").
inline constexpr std::string_view kMarketPlaceholder = "market";

TemplatePack parse_pack(const Json& dictionaries, const Json& templates);
// Reads <dir>/dictionaries.json and <dir>/templates.json.
TemplatePack load_pack(const std::string& dir);
// The pack compiled into the binary from data/pack.
const TemplatePack& default_pack();
// SchemaViolation naming the first broken invariant.
void validate_pack(const TemplatePack& pack);

// Placeholder names in order of appearance ("{city} {city}" -> city, city).
std::vector<std::string> placeholders(std::string_view body);

// Applies the field-mapping derivations: a date binding for a year-of-date
// variable yields "2023", month-of-date yields "2023-05"; direct passes through.
// UnknownVariable / UnboundVariable.
std::map<std::string, std::string> resolve_variables(const TemplatePack& pack,
                                                     const std::vector<std::string>& template_vars,
                                                     const std::map<std::string, std::string>& bindings);

// One candidate per parameter of the function. UnknownFunction.
std::map<std::string, double> sample_parameters(const TemplatePack& pack, std::string_view function_id, Rng& rng);

// UnknownMetric when the metric has no alias list.
std::string select_header_alias(const TemplatePack& pack, std::string_view metric, Rng& rng);

// UnboundPlaceholder when a placeholder has no binding.
std::string instantiate_text(std::string_view body, const std::map<std::string, std::string>& resolved);
std::string instantiate_text(const TextTemplate& t, const std::map<std::string, std::string>& resolved);

// FilterSet invariants against the pack dictionaries: UnknownVariable,
// InvalidParam, UnknownFunction.
void validate_filters(const TemplatePack& pack, const FilterSet& f);

// Uniform pick; the container must be non-empty.
template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[static_cast<std::size_t>(rng() % items.size())];
}

}  // namespace dynaslide
