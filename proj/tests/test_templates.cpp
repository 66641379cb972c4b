#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dynaslide/stats.hpp"
#include "dynaslide/templates.hpp"

using namespace dynaslide;

namespace {

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorKind::IoError;
}

}  // namespace

TEST(Pack, DefaultPackValidatesAndHasExpectedShape) {
  const TemplatePack& p = default_pack();
  EXPECT_NO_THROW(validate_pack(p));
  EXPECT_EQ(p.themes.size(), 6u);
  std::set<std::string> fns;
  for (const auto& t : p.themes) {
    EXPECT_FALSE(t.functions.empty());
    EXPECT_FALSE(p.subtemplates_of(t.id).empty());
    EXPECT_FALSE(p.titles(t.id).empty());
    fns.insert(t.functions.begin(), t.functions.end());
  }
  EXPECT_EQ(fns.size(), function_registry().size());
  for (const auto& f : function_registry()) {
    EXPECT_FALSE(p.for_function(TemplateKind::caption, f.id).empty()) << f.id;
    EXPECT_FALSE(p.for_function(TemplateKind::summary, f.id).empty()) << f.id;
  }
  EXPECT_FALSE(p.instructions("basic").empty());
  EXPECT_FALSE(p.instructions("customized").empty());
}

TEST(Pack, SummaryTemplatesOnlyNameTheirFunctionsMetrics) {
  const TemplatePack& p = default_pack();
  for (const auto& f : function_registry()) {
    const std::set<std::string> metrics(f.summary_metrics.begin(), f.summary_metrics.end());
    for (const auto* t : p.for_function(TemplateKind::summary, f.id)) {
      bool uses_metric = false;
      for (const auto& ph : placeholders(t->body)) uses_metric = uses_metric || metrics.count(ph) > 0;
      EXPECT_TRUE(uses_metric) << t->id;
    }
  }
}

TEST(Pack, BrokenPackIsRejected) {
  TemplatePack p = default_pack();
  p.templates.push_back({"cap-x", TemplateKind::caption, "{city} {rooms}", std::string("F1"), {}, {}});
  EXPECT_EQ(kind_of([&] { validate_pack(p); }), ErrorKind::SchemaViolation);
  p = default_pack();
  p.themes[0].functions.push_back("F99");
  EXPECT_EQ(kind_of([&] { validate_pack(p); }), ErrorKind::SchemaViolation);
}

TEST(Placeholders, OrderAndRepeats) {
  EXPECT_EQ(placeholders("{city} {block} in {city}"), (std::vector<std::string>{"city", "block", "city"}));
  EXPECT_TRUE(placeholders("no braces").empty());
}

TEST(Instantiate, SubstitutesEveryPlaceholder) {
  EXPECT_EQ(instantiate_text("{city} {block}, {start_year}", {{"city", "Beijing"}, {"block", "Chaoyang"},
                                                              {"start_year", "2021"}}),
            "Beijing Chaoyang, 2021");
  EXPECT_EQ(kind_of([] { instantiate_text("{city} {block}", {{"city", "Beijing"}}); }),
            ErrorKind::UnboundPlaceholder);
}

TEST(Instantiate, PropertyNoBracesSurvive) {
  const TemplatePack& p = default_pack();
  std::map<std::string, std::string> values;
  for (const auto& t : p.templates) {
    for (const auto& ph : placeholders(t.body)) values[ph] = "<" + ph + ">";
  }
  for (const auto& t : p.templates) {
    const std::string out = instantiate_text(t, values);
    EXPECT_EQ(out.find('{'), std::string::npos) << t.id;
    for (const auto& ph : placeholders(t.body)) EXPECT_NE(out.find("<" + ph + ">"), std::string::npos);
  }
}

TEST(Variables, DerivationsApply) {
  const auto& p = default_pack();
  const auto out = resolve_variables(p, {"start_year", "end_month", "city"},
                                     {{"start_year", "2021-06-30"}, {"end_month", "2023-05-31"}, {"city", "Beijing"}});
  EXPECT_EQ(out.at("start_year"), "2021");
  EXPECT_EQ(out.at("end_month"), "2023-05");
  EXPECT_EQ(out.at("city"), "Beijing");
  EXPECT_EQ(kind_of([&] { resolve_variables(p, {"rooms"}, {{"rooms", "3"}}); }), ErrorKind::UnknownVariable);
  EXPECT_EQ(kind_of([&] { resolve_variables(p, {"block"}, {}); }), ErrorKind::UnboundVariable);
}

TEST(Sampling, ParametersComeFromCandidates) {
  const auto& p = default_pack();
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto params = sample_parameters(p, "F5", rng);
    ASSERT_EQ(params.size(), 2u);
    for (const auto& [name, v] : params) {
      const auto& c = p.parameter_candidates.at(name);
      EXPECT_NE(std::find(c.begin(), c.end(), v), c.end());
    }
    EXPECT_NO_THROW(validate_params(function_info("F5"), params));
  }
  EXPECT_TRUE(sample_parameters(p, "F1", rng).empty());
  EXPECT_EQ(kind_of([&] { sample_parameters(p, "F42", rng); }), ErrorKind::UnknownFunction);
}

TEST(Sampling, AliasesComeFromTheDictionary) {
  const auto& p = default_pack();
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const std::string a = select_header_alias(p, "trade volume", rng);
    const auto& list = p.header_aliases.at("trade volume");
    EXPECT_NE(std::find(list.begin(), list.end(), a), list.end());
  }
  EXPECT_EQ(kind_of([&] { select_header_alias(p, "rooms", rng); }), ErrorKind::UnknownMetric);
}

TEST(Filters, ValidateAgainstDictionaries) {
  const auto& p = default_pack();
  FilterSet f;
  f.table_name = "resale_beijing";
  f.function_id = "F3";
  f.variables = {{"city", "Beijing"}, {"block", "Chaoyang"}, {"start_year", "2021"}, {"end_year", "2023"}};
  f.params = {{"area_bin_step", 20}};
  EXPECT_NO_THROW(validate_filters(p, f));
  auto bad = f;
  bad.variables["rooms"] = "3";
  EXPECT_EQ(kind_of([&] { validate_filters(p, bad); }), ErrorKind::UnknownVariable);
  bad = f;
  bad.params["area_bin_step"] = 21;
  EXPECT_EQ(kind_of([&] { validate_filters(p, bad); }), ErrorKind::InvalidParam);
  bad = f;
  bad.function_id = "F0";
  EXPECT_EQ(kind_of([&] { validate_filters(p, bad); }), ErrorKind::UnknownFunction);
}
