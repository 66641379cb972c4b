#pragma once

// Synthetic corpus generation, cleaning, the in-memory reference store and
// the SQL layer (compile from a ParameterState, parse back, execute).

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "dynaslide/json_io.hpp"
#include "dynaslide/model.hpp"

namespace dynaslide {

struct CorpusConfig {
  std::uint64_t seed = 1;
  std::vector<std::string> cities = {"Beijing", "Guangzhou", "Shenzhen"};
  int blocks_per_city = 4;
  int records_per_block = 500;
  DateWindow date_window = default_window();
  std::vector<std::string> market_types = {"new", "resale"};
};

void validate_config(const CorpusConfig& cfg);  // InvalidConfig

// A record plus the logical table it belongs to ("resale_beijing").
struct TaggedRecord {
  std::string table_name;
  TransactionRecord record;
  bool operator==(const TaggedRecord&) const = default;
};

std::string make_table_name(std::string_view market, std::string_view city);
// Splits "resale_beijing" into {"resale", "beijing"}; ParseError otherwise.
std::pair<std::string, std::string> split_table_name(std::string_view table);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

std::vector<TaggedRecord> generate_synthetic_records(const CorpusConfig& cfg, int jobs = 1);

// Trim + capitalise each word ("  new york" -> "New York").
std::string normalize_name(std::string_view s);

inline constexpr std::size_t kMinBlockRecords = 500;

// Drops invalid records, normalises city/block names, then drops every block
// (per table) with fewer than kMinBlockRecords survivors. Order preserved.
std::vector<TaggedRecord> clean_and_filter(const std::vector<TaggedRecord>& records,
                                           const DateWindow& window = default_window(),
                                           std::size_t min_block_records = kMinBlockRecords);
std::vector<TransactionRecord> clean_and_filter(const std::vector<TransactionRecord>& records,
                                                const DateWindow& window = default_window(),
                                                std::size_t min_block_records = kMinBlockRecords);

// ---------------------------------------------------------------------------
// Queries

using SqlValue = std::variant<std::string, double>;  // dates travel as "YYYY-MM-DD"

enum class PredicateOp { eq, between };

struct Predicate {
  std::string field;
  PredicateOp op = PredicateOp::eq;
  SqlValue lo;
  SqlValue hi;  // between only
  bool operator==(const Predicate&) const = default;
};

struct QuerySpec {
  std::string table_name;
  std::vector<Predicate> predicates;
  std::vector<std::string> projection;
  bool operator==(const QuerySpec&) const = default;
};

// Records satisfying a predicate list (shared by the store and the oracles).
bool matches(const TransactionRecord& r, const Predicate& p);

// Copy of r with every field outside the projection reset to its default.
TransactionRecord project_record(const TransactionRecord& r, const std::vector<std::string>& projection);

struct QueryResult {
  std::vector<std::string> projection;
  std::vector<TransactionRecord> rows;
};

class Store {
 public:
  Store() = default;
  explicit Store(const std::vector<TaggedRecord>& records);

  bool has_table(std::string_view name) const;
  std::vector<std::string> table_names() const;
  const std::vector<TransactionRecord>& table(std::string_view name) const;  // UnknownTable
  std::vector<std::string> cities(std::string_view table) const;
  std::vector<std::string> blocks(std::string_view table, std::string_view city) const;
  std::vector<std::string> projects(std::string_view table, std::string_view city, std::string_view block) const;
  std::size_t size() const;

  // Sorted by (date_code, block, project); unprojected fields are blanked.
  QueryResult execute(const QuerySpec& spec) const;
  std::vector<TaggedRecord> all_records() const;

 private:
  std::map<std::string, std::vector<TransactionRecord>, std::less<>> tables_;
  // "<table>\x1f<city>\x1f<block>" -> row positions within the table.
  std::unordered_map<std::string, std::vector<std::size_t>> block_index_;
};

QueryResult execute_query(const Store& store, const QuerySpec& spec);

// Validates field names and value types; throws UnknownField / SchemaViolation.
void validate_query(const QuerySpec& spec);

// ---------------------------------------------------------------------------
// SQL text

struct CompiledSql {
  std::string text;
  std::vector<SqlValue> params;
  bool operator==(const CompiledSql&) const = default;
};

// Query for a ParameterState: one predicate per non-null slot, projection of
// the logic's source fields plus its constraint and header-key columns.
QuerySpec query_for_state(const ParameterState& state);
CompiledSql compile_sql(const QuerySpec& spec);
// Throws UnknownTable when the store lacks the table, EmptyProjection, UnknownField.
CompiledSql compile_sql(const ParameterState& state, const Store& store);
// As above from the JSON form; a slot key outside the schema is UnknownField.
CompiledSql compile_sql(const Json& state, const Store& store);

// Parses the ANSI subset emitted by compile_sql (literals allowed in place of
// '?'). ParseError on syntax, UnknownField on unknown columns.
QuerySpec parse_sql(std::string_view text, const std::vector<SqlValue>& params = {});

// ---------------------------------------------------------------------------
// Dumps

std::string to_ndjson(const std::vector<TaggedRecord>& records);
std::vector<TaggedRecord> from_ndjson(std::string_view text);
// CREATE TABLE + COPY ... FROM stdin script for PostgreSQL-style servers.
std::string to_sql_script(const std::vector<TaggedRecord>& records);

// ---------------------------------------------------------------------------
// External relational backend selected by DYNASLIDE_DB_URL. SQLite is the
// bundled driver ("sqlite::memory:" or "sqlite:<path>").

class SqlBackend {
 public:
  virtual ~SqlBackend() = default;
  virtual void load(const Store& store) = 0;
  virtual QueryResult execute(const CompiledSql& sql, const std::vector<std::string>& projection) = 0;
};

// Throws InvalidConfig for unsupported URL schemes.
std::unique_ptr<SqlBackend> open_backend(const std::string& url);

}  // namespace dynaslide
