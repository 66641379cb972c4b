#pragma once

// Scoring: slide exact match, element-level accuracy, module-wise accuracy
// from stage traces, and report rendering.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynaslide/agent.hpp"
#include "dynaslide/datastore.hpp"
#include "dynaslide/json_io.hpp"
#include "dynaslide/model.hpp"
#include "dynaslide/state.hpp"

namespace dynaslide {

std::string normalize_whitespace(std::string_view s);

bool slide_exact_match(const SlideDocument& pred, const SlideDocument& gold);

// Title covers titles and captions.
inline constexpr std::array<std::string_view, 4> kElementGroups = {"Title", "Table", "Chart", "Summary"};
inline constexpr std::array<std::string_view, 6> kModules = {"Func. Logic", "Data Src.", "Instr. Parse",
                                                             "SQL Gen.",    "Tool Inv.", "Sum. Upd."};

// Per-group verdict for one case; a group absent from gold counts as matched,
// a missing prediction fails every group gold has.
std::map<std::string, bool> element_matches(const std::optional<SlideDocument>& pred, const SlideDocument& gold);

// LengthMismatch when the lists differ in size. Empty input gives zeros.
std::map<std::string, double> element_accuracy(const std::vector<std::optional<SlideDocument>>& preds,
                                               const std::vector<SlideDocument>& golds);

// Gold intermediates derived from a case's metadata.
struct GoldIntermediates {
  Json layout;
  Json data_source;
  Json logic;
  Json instruction;
  CompiledSql sql;
  Json table;
  std::string summary;
  SummaryMetrics metrics;
};

GoldIntermediates gold_intermediates(const SlideMetadata& meta, const SlideDocument& gold_target, LogicMode mode,
                                     const Store& store);

// Per-module verdict from one 7-stage trace set (IncompleteTrace otherwise),
// plus "Layout" scored separately.
std::map<std::string, bool> module_matches(const std::vector<StageTrace>& traces, const GoldIntermediates& gold,
                                           const Store& store);

struct EvalCase {
  std::string id;
  int theme_id = 0;
  std::string function_id;
  std::string scenario;
  LogicMode mode = LogicMode::closed;
  SlideDocument gold;
  SlideMetadata gold_meta;
  std::optional<SlideDocument> pred;
  std::vector<StageTrace> traces;
};

struct CaseScore {
  std::string id;
  int theme_id = 0;
  std::string scenario;
  LogicMode mode = LogicMode::closed;
  bool exact = false;
  std::map<std::string, bool> elements;
  std::map<std::string, bool> modules;
  std::optional<bool> summary_facts;  // secondary: every metric the gold summary mentions appears in the prediction
};

CaseScore score_case(const EvalCase& c, const Store& store);

// Traces and gold metadata aligned by index. IncompleteTrace, LengthMismatch.
std::map<std::string, double> module_accuracy(const std::vector<std::vector<StageTrace>>& traces,
                                              const std::vector<SlideMetadata>& gold_metadata,
                                              const std::vector<SlideDocument>& gold_targets, LogicMode mode,
                                              const Store& store);

struct Report {
  Json json;
  std::string text;
};

Report report(const std::vector<CaseScore>& scores);

}  // namespace dynaslide
