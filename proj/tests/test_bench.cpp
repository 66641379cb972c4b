#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>
#include <set>
#include <unistd.h>

#include "dynaslide/bench.hpp"
#include "support.hpp"

using namespace dynaslide;
namespace fs = std::filesystem;

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

std::vector<SplitItem> items_for(const std::vector<std::size_t>& group_sizes) {
  std::vector<SplitItem> items;
  for (std::size_t g = 0; g < group_sizes.size(); ++g) {
    for (std::size_t i = 0; i < group_sizes[g]; ++i) {
      items.push_back({"g" + std::to_string(g) + "_" + std::to_string(i), static_cast<int>(g + 1)});
    }
  }
  return items;
}

const Dataset& dataset() {
  static const Dataset d = [] {
    BenchConfig cfg;
    cfg.count = 40;
    cfg.seed = 11;
    return build_dataset(cfg, default_pack(), testsupport::corpus_store());
  }();
  return d;
}

FilterSet beijing_filters() {
  FilterSet f;
  f.table_name = "resale_beijing";
  f.function_id = "F3";
  f.variables = {{"city", "Beijing"}, {"block", "Chaoyang"}, {"start_year", "2021"}, {"end_year", "2023"}};
  f.params = {{"area_bin_step", 20}};
  return f;
}

}  // namespace

TEST(Splits, ThreeSingletonGroups) {
  const Splits s = split_dataset(items_for({1, 1, 1}));
  EXPECT_EQ(s.train.size(), 1u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(Splits, Rejections) {
  EXPECT_EQ(kind_of([] { split_dataset(items_for({5, 5})); }), ErrorKind::TooFewSubtemplates);
  EXPECT_EQ(kind_of([] { split_dataset(items_for({5, 5, 5}), {0.5, 0.3, 0.3}); }), ErrorKind::InvalidConfig);
}

TEST(Splits, ReachesExactTargetsWhenAttainable) {
  // 20036 items: 0.2 of that is 4007.2, so the best val/test sizes are 4007.
  std::vector<std::size_t> sizes;
  std::mt19937_64 rng(2);
  std::size_t total = 0;
  while (total < 20036 - 200) {
    sizes.push_back(20 + rng() % 180);
    total += sizes.back();
  }
  for (std::size_t s : {1u, 2u, 3u, 5u, 8u}) {
    sizes.push_back(s);
    total += s;
  }
  sizes.push_back(20036 - total);
  const Splits s = split_dataset(items_for(sizes));
  EXPECT_EQ(s.train.size(), 12022u);
  EXPECT_EQ(s.val.size(), 4007u);
  EXPECT_EQ(s.test.size(), 4007u);
}

TEST(Splits, PropertyDisjointCoveringAndGroupPure) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> sizes(3 + rng() % 30);
    for (auto& s : sizes) s = 1 + rng() % 12;
    const auto items = items_for(sizes);
    const Splits s = split_dataset(items);
    std::map<std::string, int> where;
    for (const auto& id : s.train) where[id] = 0;
    for (const auto& id : s.val) where[id] = where.count(id) ? -1 : 1;
    for (const auto& id : s.test) where[id] = where.count(id) ? -1 : 2;
    ASSERT_EQ(where.size(), items.size());
    EXPECT_FALSE(s.train.empty() || s.val.empty() || s.test.empty());
    std::map<int, std::set<int>> split_of_group;
    for (const auto& it : items) {
      ASSERT_NE(where.at(it.id), -1);
      split_of_group[it.subtemplate_id].insert(where.at(it.id));
    }
    for (const auto& [g, splits] : split_of_group) EXPECT_EQ(splits.size(), 1u) << g;
  }
}

TEST(Merge, KeyWiseOverride) {
  FilterSet q;
  q.variables = {{"start_year", "2020"}};
  q.params = {{"area_bin_step", 30}};
  const FilterSet m = merge_filters(beijing_filters(), q);
  EXPECT_EQ(m.variables.at("start_year"), "2020");
  EXPECT_EQ(m.variables.at("end_year"), "2023");
  EXPECT_EQ(m.params.at("area_bin_step"), 30);
  EXPECT_EQ(m.table_name, beijing_filters().table_name);
  EXPECT_EQ(merge_filters(beijing_filters(), FilterSet{}), beijing_filters());
}

TEST(Merge, CityChangeRetargetsWithinMarket) {
  FilterSet q;
  q.table_name = "resale_shenzhen";
  q.variables = {{"city", "Shenzhen"}, {"block", "Futian"}};
  const FilterSet m = merge_filters(beijing_filters(), q, &testsupport::corpus_store());
  EXPECT_EQ(*m.table_name, "resale_shenzhen");
  EXPECT_EQ(m.variables.at("block"), "Futian");
}

TEST(Merge, Conflicts) {
  FilterSet other_market;
  other_market.table_name = "new_beijing";
  EXPECT_EQ(kind_of([&] { merge_filters(beijing_filters(), other_market); }), ErrorKind::ConflictingTable);
  FilterSet missing;
  missing.table_name = "resale_wuhan";
  missing.variables = {{"city", "Wuhan"}};
  EXPECT_EQ(kind_of([&] { merge_filters(beijing_filters(), missing, &testsupport::corpus_store()); }),
            ErrorKind::ConflictingTable);
  FilterSet city_only;
  city_only.variables = {{"city", "Shenzhen"}};
  EXPECT_EQ(kind_of([&] { merge_filters(beijing_filters(), city_only); }), ErrorKind::ConflictingTable);
}

TEST(Instructions, PropertyTextAndDeltaAgree) {
  const auto& pack = default_pack();
  const Store& store = testsupport::corpus_store();
  Rng rng(23);
  for (const auto& t : dataset().triples) {
    for (const char* scenario : {"basic", "customized"}) {
      if (std::string(scenario) == "customized" && function_info(*t.metadata.slide_filters.function_id).params.empty()) {
        continue;
      }
      SlideMetadata meta = t.metadata;
      meta.query_filters.reset();
      meta.update_filters.reset();
      const Instruction in = generate_instruction(pack, store, meta, scenario, rng);
      EXPECT_EQ(in.scenario, scenario);
      EXPECT_EQ(in.text.find('{'), std::string::npos) << in.text;
      EXPECT_FALSE(in.query_filters.empty());
      const FilterSet& old = meta.slide_filters;
      // A new period may share one endpoint with the old one, so compare the variables as a whole.
      bool changed = !in.query_filters.params.empty();
      for (const auto& [k, v] : in.query_filters.variables) {
        changed = changed || old.variables.at(k) != v;
        EXPECT_NE(in.text.find(v), std::string::npos) << in.text << " lacks " << v;
      }
      for (const auto& [k, v] : in.query_filters.params) {
        EXPECT_NE(old.params.at(k), v);
        EXPECT_NE(in.text.find(format_number(v)), std::string::npos) << in.text;
      }
      EXPECT_TRUE(changed) << in.text;
      const FilterSet merged = merge_filters(old, in.query_filters, &store);
      EXPECT_NO_THROW(validate_filters(pack, merged));
      EXPECT_NO_THROW(state_from_filters(merged, LogicMode::closed));
    }
  }
}

TEST(Dataset, TriplesAreConsistent) {
  const auto& d = dataset();
  const auto& pack = default_pack();
  const Store& store = testsupport::corpus_store();
  ASSERT_EQ(d.triples.size(), 40u);
  std::set<std::string> ids;
  for (const auto& t : d.triples) {
    ids.insert(t.id);
    EXPECT_NO_THROW(validate_slide(t.source));
    EXPECT_NO_THROW(validate_slide(t.target));
    EXPECT_EQ(strip_content(t.source), strip_content(t.target));
    EXPECT_NE(t.source, t.target) << t.id;
    ASSERT_TRUE(t.metadata.update_filters && t.metadata.query_filters);
    EXPECT_EQ(*t.metadata.update_filters, merge_filters(t.metadata.slide_filters, *t.metadata.query_filters, &store));
    EXPECT_EQ(generate_target_slide(pack, store, t.source, t.metadata).slide, t.target);
    EXPECT_EQ(pack.subtemplate(t.subtemplate_id).theme_id, t.theme_id);
    EXPECT_TRUE(t.split == "train" || t.split == "val" || t.split == "test");
  }
  EXPECT_EQ(ids.size(), d.triples.size());
}

TEST(Dataset, DeterministicAcrossJobs) {
  BenchConfig cfg;
  cfg.count = 40;
  cfg.seed = 11;
  cfg.jobs = 3;
  const Dataset d = build_dataset(cfg, default_pack(), testsupport::corpus_store());
  EXPECT_EQ(canonical_dump(manifest_json(d)), canonical_dump(manifest_json(dataset())));
  for (std::size_t i = 0; i < d.triples.size(); ++i) EXPECT_EQ(d.triples[i].target, dataset().triples[i].target);
}

TEST(Dataset, TooSmallForThreeSubtemplates) {
  BenchConfig cfg;
  cfg.count = 2;
  EXPECT_EQ(kind_of([&] { build_dataset(cfg, default_pack(), testsupport::corpus_store()); }),
            ErrorKind::InsufficientSubtemplates);
}

TEST(Dataset, WriteLoadRoundTrip) {
  const fs::path dir = fs::temp_directory_path() / ("dynaslide_bench_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  write_dataset(dataset(), testsupport::corpus_store(), dir.string());
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "corpus.ndjson"));
  EXPECT_FALSE(fs::is_empty(dir / "charts"));
  const LoadedBench b = load_dataset(dir.string());
  ASSERT_EQ(b.triples.size(), dataset().triples.size());
  for (std::size_t i = 0; i < b.triples.size(); ++i) {
    EXPECT_EQ(b.triples[i].source, dataset().triples[i].source);
    EXPECT_EQ(b.triples[i].target, dataset().triples[i].target);
    EXPECT_EQ(b.triples[i].metadata, dataset().triples[i].metadata);
    EXPECT_EQ(b.triples[i].split, dataset().triples[i].split);
  }
  EXPECT_EQ(b.store.size(), testsupport::corpus_store().size());
  fs::remove_all(dir);
}
