#pragma once

// Benchmark construction: source slides, instructions, merged filters,
// target slides, sub-template-disjoint splits and the on-disk dataset.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynaslide/datastore.hpp"
#include "dynaslide/model.hpp"
#include "dynaslide/render.hpp"
#include "dynaslide/state.hpp"
#include "dynaslide/templates.hpp"

namespace dynaslide {

struct GeneratedSlide {
  SlideDocument slide;
  SlideMetadata metadata;
};

// Everything computed for one filter set: the query state, raw and labeled
// tables and the summary metrics.
struct Computation {
  ParameterState state;
  AnalyticalTable raw;
  AnalyticalTable labeled;
  SummaryMetrics metrics;
};

Computation compute_for_filters(const Store& store, const FilterSet& filters,
                                const std::map<std::string, std::string>& aliases);

// Content for every element of a slide described by metadata.template_slide.
std::map<std::string, Content> slide_contents(const TemplatePack& pack, const SlideDocument& skeleton,
                                              const SlideMetadata& metadata, const Computation& c);

// `functions` narrows the theme's functions (empty keeps them all).
GeneratedSlide generate_source_slide(const TemplatePack& pack, const Store& store, int theme_id, int subtemplate_id,
                                     Rng& rng, const std::vector<std::string>& functions = {});

struct Instruction {
  std::string scenario;  // basic | customized
  std::string template_id;
  std::string text;
  FilterSet query_filters;
};

// NoApplicableTemplate when no template fits the slide's function.
Instruction generate_instruction(const TemplatePack& pack, const Store& store, const SlideMetadata& metadata,
                                 std::string_view scenario, Rng& rng);

// Key-wise override. ConflictingTable when the query retargets to another
// market, to a table the store lacks, or to a city that disagrees with it.
FilterSet merge_filters(const FilterSet& slide_filters, const FilterSet& query_filters,
                        const Store* store = nullptr);

// Requires metadata.update_filters. Layout comes from the source slide.
GeneratedSlide generate_target_slide(const TemplatePack& pack, const Store& store, const SlideDocument& source,
                                     const SlideMetadata& metadata);

// ---------------------------------------------------------------------------
// Splits

struct SplitItem {
  std::string id;
  int subtemplate_id = 0;
};

struct Splits {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

// Whole sub-templates go to one split. TooFewSubtemplates below 3 groups,
// InvalidConfig when the ratios do not sum to 1.
Splits split_dataset(const std::vector<SplitItem>& items, const std::array<double, 3>& ratios = {0.6, 0.2, 0.2});

// ---------------------------------------------------------------------------
// Dataset

struct BenchConfig {
  std::size_t count = 200;
  std::uint64_t seed = 7;
  double customized_share = 0.35;
  int min_instructions = 2;
  int max_instructions = 3;
  std::array<double, 3> ratios = {0.6, 0.2, 0.2};
  int jobs = 1;
};

struct Triple {
  std::string id;
  std::string slide_id;
  int theme_id = 0;
  int subtemplate_id = 0;
  std::string function_id;
  std::string scenario;
  std::string instruction_template;
  std::string instruction;
  SlideDocument source;
  SlideDocument target;
  SlideMetadata metadata;  // with query / update filters and output_slide
  std::string split;
};

struct Dataset {
  BenchConfig config;
  std::string pack_version;
  std::vector<Triple> triples;
  Splits splits;
};

// InsufficientSubtemplates when the count cannot cover three sub-templates.
Dataset build_dataset(const BenchConfig& cfg, const TemplatePack& pack, const Store& store);

// slides/, charts/, metadata/, manifest.json and corpus.ndjson under dir.
void write_dataset(const Dataset& d, const Store& store, const std::string& dir);
Json manifest_json(const Dataset& d);

struct LoadedBench {
  Json manifest;
  Store store;
  std::vector<Triple> triples;
};

LoadedBench load_dataset(const std::string& dir);

}  // namespace dynaslide
