#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <set>

#include "dynaslide/datastore.hpp"
#include "dynaslide/json_io.hpp"
#include "support.hpp"

using namespace dynaslide;
using testsupport::corpus_store;

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

CorpusConfig tiny_config(std::uint64_t seed) {
  CorpusConfig cfg;
  cfg.seed = seed;
  cfg.cities = {"Beijing", "Shenzhen"};
  cfg.blocks_per_city = 2;
  cfg.records_per_block = 60;
  return cfg;
}

}  // namespace

TEST(Generation, DeterministicAcrossSeedsAndJobs) {
  const auto a = generate_synthetic_records(tiny_config(5), 1);
  const auto b = generate_synthetic_records(tiny_config(5), 3);
  const auto c = generate_synthetic_records(tiny_config(6), 1);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(a.size(), 2u * 2u * 2u * 60u);  // markets x cities x blocks x records
  for (const auto& t : a) {
    EXPECT_NO_THROW(validate_record(t.record));
    const auto [market, city] = split_table_name(t.table_name);
    EXPECT_EQ(normalize_name(city), t.record.city);
    EXPECT_TRUE(market == "new" || market == "resale");
  }
}

TEST(Generation, ConfigValidation) {
  auto cfg = tiny_config(1);
  cfg.cities.clear();
  EXPECT_EQ(kind_of([&] { validate_config(cfg); }), ErrorKind::InvalidConfig);
  cfg = tiny_config(1);
  cfg.records_per_block = 0;
  EXPECT_EQ(kind_of([&] { validate_config(cfg); }), ErrorKind::InvalidConfig);
}

TEST(Names, NormalizeAndSplit) {
  EXPECT_EQ(normalize_name("  new york "), "New York");
  EXPECT_EQ(normalize_name("BEIJING"), "Beijing");
  EXPECT_EQ(make_table_name("resale", "Beijing"), "resale_beijing");
  EXPECT_EQ(split_table_name("new_shenzhen"), (std::pair<std::string, std::string>{"new", "shenzhen"}));
  EXPECT_EQ(kind_of([] { split_table_name("shenzhen"); }), ErrorKind::ParseError);
}

TEST(Cleaning, DropsInvalidRecordsAndSmallBlocks) {
  std::mt19937_64 rng(9);
  std::vector<TransactionRecord> rows;
  for (int i = 0; i < 12; ++i) rows.push_back(testsupport::grid_record(rng, "beijing", " chaoyang"));
  for (int i = 0; i < 9; ++i) rows.push_back(testsupport::grid_record(rng, "Beijing", "Haidian"));
  rows[0].dim_price = -1;  // invalid, leaves 11 Chaoyang records
  const auto kept = clean_and_filter(rows, default_window(), 10);
  ASSERT_EQ(kept.size(), 11u);
  for (const auto& r : kept) {
    EXPECT_EQ(r.city, "Beijing");
    EXPECT_EQ(r.block, "Chaoyang");
  }
  EXPECT_EQ(clean_and_filter(rows, default_window(), 12).size(), 0u);
}

TEST(Store, MatchesLinearScanOracle) {
  const Store& store = corpus_store();
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const QuerySpec q = testsupport::random_query(store, rng);
    EXPECT_EQ(testsupport::result_keys(store.execute(q)), testsupport::oracle_scan(store.table(q.table_name), q))
        << compile_sql(q).text;
  }
}

TEST(Store, UnknownTableAndFields) {
  const Store& store = corpus_store();
  EXPECT_EQ(kind_of([&] { store.execute({"rental_beijing", {}, {"city"}}); }), ErrorKind::UnknownTable);
  EXPECT_EQ(kind_of([&] { store.execute({"resale_beijing", {}, {"rooms"}}); }), ErrorKind::UnknownField);
  EXPECT_EQ(kind_of([&] { compile_sql(QuerySpec{"resale_beijing", {}, {}}); }), ErrorKind::EmptyProjection);
}

TEST(Sql, CompileParseRoundTrip) {
  const Store& store = corpus_store();
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const QuerySpec q = testsupport::random_query(store, rng);
    const CompiledSql sql = compile_sql(q);
    EXPECT_EQ(std::count(sql.text.begin(), sql.text.end(), '?'), static_cast<long>(sql.params.size()));
    EXPECT_EQ(parse_sql(sql.text, sql.params), q) << sql.text;
  }
}

TEST(Sql, ParsesInlineLiterals) {
  const QuerySpec q = parse_sql(
      "SELECT trade_sets, date_code FROM resale_beijing WHERE city = 'Beijing' AND dim_area BETWEEN 60 AND 90");
  ASSERT_EQ(q.predicates.size(), 2u);
  EXPECT_EQ(q.table_name, "resale_beijing");
  EXPECT_EQ(q.projection, (std::vector<std::string>{"trade_sets", "date_code"}));
  EXPECT_EQ(std::get<std::string>(q.predicates[0].lo), "Beijing");
  EXPECT_EQ(std::get<double>(q.predicates[1].hi), 90.0);
  EXPECT_EQ(kind_of([] { parse_sql("SELECT FROM t"); }), ErrorKind::ParseError);
  EXPECT_EQ(kind_of([] { parse_sql("SELECT rooms FROM resale_beijing"); }), ErrorKind::UnknownField);
}

TEST(Dumps, NdjsonRoundTrip) {
  const auto recs = generate_synthetic_records(tiny_config(2));
  EXPECT_EQ(from_ndjson(to_ndjson(recs)), recs);
  const std::string script = to_sql_script(recs);
  EXPECT_NE(script.find("CREATE TABLE"), std::string::npos);
  EXPECT_NE(script.find("resale_beijing"), std::string::npos);
}

TEST(Backend, BundledSqliteParity) {
  const Store& store = corpus_store();
  auto backend = open_backend("sqlite::memory:");
  backend->load(store);
  std::mt19937_64 rng(77);
  for (int i = 0; i < 60; ++i) {
    const QuerySpec q = testsupport::random_query(store, rng);
    EXPECT_EQ(testsupport::result_keys(backend->execute(compile_sql(q), q.projection)),
              testsupport::result_keys(store.execute(q)))
        << compile_sql(q).text;
  }
  EXPECT_EQ(kind_of([] { open_backend("mysql://x"); }), ErrorKind::InvalidConfig);
}

TEST(Backend, ExternalServerParity) {
  const char* url = std::getenv("DYNASLIDE_DB_URL");
  if (!url || !*url) GTEST_SKIP() << "DYNASLIDE_DB_URL not set";
  const Store& store = corpus_store();
  auto backend = open_backend(url);
  backend->load(store);
  std::mt19937_64 rng(78);
  for (int i = 0; i < 100; ++i) {
    const QuerySpec q = testsupport::random_query(store, rng);
    EXPECT_EQ(testsupport::result_keys(backend->execute(compile_sql(q), q.projection)),
              testsupport::result_keys(store.execute(q)));
  }
}
