#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "dynaslide/datastore.hpp"
#include "dynaslide/stats.hpp"

namespace dynaslide {

QuerySpec query_for_state(const ParameterState& state) {
  QuerySpec q;
  q.table_name = state.table_name;
  const Slots& s = state.slots;
  auto eq = [&](const char* field, const std::optional<std::string>& v) {
    if (v) q.predicates.push_back({field, PredicateOp::eq, *v, {}});
  };
  auto range = [&](const char* field, const std::optional<NumRange>& v) {
    if (v) q.predicates.push_back({field, PredicateOp::between, v->min, v->max});
  };
  eq("city", s.city);
  eq("block", s.block);
  eq("project", s.project);
  if (s.date_code) {
    q.predicates.push_back(
        {"date_code", PredicateOp::between, format_date(s.date_code->from), format_date(s.date_code->to)});
  }
  range("supply_sets", s.supply_sets);
  range("trade_sets", s.trade_sets);
  range("dim_area", s.dim_area);
  range("dim_price", s.dim_price);
  range("dim_unit_price", s.dim_unit_price);
  q.projection = source_columns(state.logic);
  return q;
}

CompiledSql compile_sql(const QuerySpec& spec) {
  validate_query(spec);
  CompiledSql out;
  out.text = "SELECT ";
  for (std::size_t i = 0; i < spec.projection.size(); ++i) {
    if (i) out.text += ", ";
    out.text += spec.projection[i];
  }
  out.text += " FROM " + spec.table_name;
  for (std::size_t i = 0; i < spec.predicates.size(); ++i) {
    const auto& p = spec.predicates[i];
    out.text += i == 0 ? " WHERE " : " AND ";
    out.text += p.field;
    if (p.op == PredicateOp::eq) {
      out.text += " = ?";
      out.params.push_back(p.lo);
    } else {
      out.text += " BETWEEN ? AND ?";
      out.params.push_back(p.lo);
      out.params.push_back(p.hi);
    }
  }
  return out;
}

CompiledSql compile_sql(const ParameterState& state, const Store& store) {
  if (!store.has_table(state.table_name)) throw Error(ErrorKind::UnknownTable, state.table_name);
  return compile_sql(query_for_state(state));
}

CompiledSql compile_sql(const Json& state, const Store& store) {
  if (state.is_object() && state.contains("slots") && state.at("slots").is_object()) {
    for (const auto& [k, v] : state.at("slots").items()) {
      if (!is_schema_field(k)) throw Error(ErrorKind::UnknownField, k);
    }
  }
  return compile_sql(parameter_state_from_json(state), store);
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Token {
  enum Kind { ident, number, string, symbol, end } kind;
  std::string text;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t p = 0;
  while (p < s.size()) {
    const char c = s[p];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++p;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t q = p;
      while (q < s.size() && (std::isalnum(static_cast<unsigned char>(s[q])) || s[q] == '_')) ++q;
      out.push_back({Token::ident, std::string(s.substr(p, q - p))});
      p = q;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '-' && p + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[p + 1])))) {
      std::size_t q = p + 1;
      while (q < s.size() && (std::isdigit(static_cast<unsigned char>(s[q])) || s[q] == '.' || s[q] == 'e' ||
                              s[q] == 'E')) {
        ++q;
      }
      out.push_back({Token::number, std::string(s.substr(p, q - p))});
      p = q;
    } else if (c == '\'') {
      std::string lit;
      std::size_t q = p + 1;
      for (;;) {
        if (q >= s.size()) throw Error(ErrorKind::ParseError, "unterminated string literal");
        if (s[q] == '\'') {
          if (q + 1 < s.size() && s[q + 1] == '\'') {
            lit += '\'';
            q += 2;
            continue;
          }
          break;
        }
        lit += s[q++];
      }
      out.push_back({Token::string, lit});
      p = q + 1;
    } else if (c == ',' || c == '=' || c == '?' || c == ';' || c == '*') {
      out.push_back({Token::symbol, std::string(1, c)});
      ++p;
    } else {
      throw Error(ErrorKind::ParseError, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Token::end, ""});
  return out;
}

bool keyword(const Token& t, std::string_view kw) {
  if (t.kind != Token::ident || t.text.size() != kw.size()) return false;
  for (std::size_t i = 0; i < kw.size(); ++i) {
    if (std::toupper(static_cast<unsigned char>(t.text[i])) != kw[i]) return false;
  }
  return true;
}

class SqlParser {
 public:
  SqlParser(std::string_view text, const std::vector<SqlValue>& params) : toks_(tokenize(text)), params_(params) {}

  QuerySpec parse() {
    QuerySpec q;
    expect_keyword("SELECT");
    do {
      q.projection.push_back(column());
    } while (accept(","));
    expect_keyword("FROM");
    if (peek().kind != Token::ident) fail("table name");
    q.table_name = next().text;
    if (keyword(peek(), "WHERE")) {
      next();
      do {
        Predicate p;
        p.field = column();
        if (accept("=")) {
          p.op = PredicateOp::eq;
          p.lo = value(p.field);
        } else if (keyword(peek(), "BETWEEN")) {
          next();
          p.op = PredicateOp::between;
          p.lo = value(p.field);
          expect_keyword("AND");
          p.hi = value(p.field);
        } else {
          fail("'=' or BETWEEN");
        }
        q.predicates.push_back(std::move(p));
      } while (keyword(peek(), "AND") && (next(), true));
    }
    accept(";");
    if (peek().kind != Token::end) fail("end of statement");
    if (used_ != params_.size()) throw Error(ErrorKind::ParseError, "unused bound parameters");
    validate_query(q);
    return q;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  [[noreturn]] void fail(std::string_view wanted) const {
    throw Error(ErrorKind::ParseError, "expected " + std::string(wanted) + " near '" + peek().text + "'");
  }
  bool accept(std::string_view sym) {
    if (peek().kind == Token::symbol && peek().text == sym) {
      next();
      return true;
    }
    return false;
  }
  void expect_keyword(std::string_view kw) {
    if (!keyword(peek(), kw)) fail(kw);
    next();
  }
  std::string column() {
    if (peek().kind != Token::ident) fail("column name");
    for (std::string_view kw : {"SELECT", "FROM", "WHERE", "AND", "BETWEEN"}) {
      if (keyword(peek(), kw)) fail("column name");
    }
    std::string name = next().text;
    if (!is_schema_field(name)) throw Error(ErrorKind::UnknownField, name);
    return name;
  }
  SqlValue value(const std::string& field) {
    const bool textual = field == "city" || field == "block" || field == "project" || field == "date_code";
    const Token& t = next();
    if (t.kind == Token::symbol && t.text == "?") {
      if (used_ >= params_.size()) throw Error(ErrorKind::ParseError, "missing bound parameter");
      return params_[used_++];
    }
    if (t.kind == Token::string) return textual ? SqlValue(t.text) : SqlValue(std::strtod(t.text.c_str(), nullptr));
    if (t.kind == Token::number) return textual ? SqlValue(t.text) : SqlValue(std::strtod(t.text.c_str(), nullptr));
    --pos_;
    fail("value");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const std::vector<SqlValue>& params_;
  std::size_t used_ = 0;
};

}  // namespace

QuerySpec parse_sql(std::string_view text, const std::vector<SqlValue>& params) {
  return SqlParser(text, params).parse();
}

// ---------------------------------------------------------------------------
// SQLite backend

namespace {

class SqliteBackend final : public SqlBackend {
 public:
  explicit SqliteBackend(const std::string& path) {
    if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK) {
      const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
      sqlite3_close(db_);
      throw Error(ErrorKind::InvalidConfig, "cannot open sqlite database: " + msg);
    }
  }
  ~SqliteBackend() override { sqlite3_close(db_); }

  void load(const Store& store) override {
    exec("BEGIN");
    for (const auto& name : store.table_names()) {
      exec("DROP TABLE IF EXISTS " + name);
      exec("CREATE TABLE " + name +
           " (city TEXT, block TEXT, project TEXT, date_code TEXT, supply_sets INTEGER, trade_sets INTEGER,"
           " dim_area REAL, dim_price REAL, dim_unit_price REAL)");
      exec("CREATE INDEX " + name + "_city_block ON " + name + " (city, block)");
      sqlite3_stmt* st = prepare("INSERT INTO " + name + " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)");
      for (const auto& r : store.table(name)) {
        const std::string date = format_date(r.date_code);
        sqlite3_bind_text(st, 1, r.city.c_str(), -1, SQLITE_TRANSIENT);
        sqlite3_bind_text(st, 2, r.block.c_str(), -1, SQLITE_TRANSIENT);
        sqlite3_bind_text(st, 3, r.project.c_str(), -1, SQLITE_TRANSIENT);
        sqlite3_bind_text(st, 4, date.c_str(), -1, SQLITE_TRANSIENT);
        sqlite3_bind_int64(st, 5, r.supply_sets);
        sqlite3_bind_int64(st, 6, r.trade_sets);
        sqlite3_bind_double(st, 7, r.dim_area);
        sqlite3_bind_double(st, 8, r.dim_price);
        sqlite3_bind_double(st, 9, r.dim_unit_price);
        if (sqlite3_step(st) != SQLITE_DONE) fail_stmt(st);
        sqlite3_reset(st);
      }
      sqlite3_finalize(st);
    }
    exec("COMMIT");
  }

  QueryResult execute(const CompiledSql& sql, const std::vector<std::string>& projection) override {
    sqlite3_stmt* st = prepare(sql.text);
    for (std::size_t i = 0; i < sql.params.size(); ++i) {
      const int idx = static_cast<int>(i) + 1;
      if (const auto* s = std::get_if<std::string>(&sql.params[i])) {
        sqlite3_bind_text(st, idx, s->c_str(), -1, SQLITE_TRANSIENT);
      } else {
        sqlite3_bind_double(st, idx, std::get<double>(sql.params[i]));
      }
    }
    QueryResult out;
    out.projection = projection;
    int rc;
    while ((rc = sqlite3_step(st)) == SQLITE_ROW) {
      TransactionRecord r;
      for (int c = 0; c < sqlite3_column_count(st); ++c) {
        const std::string col = sqlite3_column_name(st, c);
        auto text = [&] { return std::string(reinterpret_cast<const char*>(sqlite3_column_text(st, c))); };
        if (col == "city") r.city = text();
        else if (col == "block") r.block = text();
        else if (col == "project") r.project = text();
        else if (col == "date_code") r.date_code = parse_date(text());
        else if (col == "supply_sets") r.supply_sets = sqlite3_column_int64(st, c);
        else if (col == "trade_sets") r.trade_sets = sqlite3_column_int64(st, c);
        else if (col == "dim_area") r.dim_area = sqlite3_column_double(st, c);
        else if (col == "dim_price") r.dim_price = sqlite3_column_double(st, c);
        else if (col == "dim_unit_price") r.dim_unit_price = sqlite3_column_double(st, c);
      }
      out.rows.push_back(std::move(r));
    }
    if (rc != SQLITE_DONE) fail_stmt(st);
    sqlite3_finalize(st);
    return out;
  }

 private:
  void exec(const std::string& sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
      const std::string msg = err ? err : "unknown error";
      sqlite3_free(err);
      throw Error(ErrorKind::IoError, "sqlite: " + msg);
    }
  }
  sqlite3_stmt* prepare(const std::string& sql) {
    sqlite3_stmt* st = nullptr;
    if (sqlite3_prepare_v2(db_, sql.c_str(), -1, &st, nullptr) != SQLITE_OK) {
      const std::string msg = sqlite3_errmsg(db_);
      const bool missing_table = msg.find("no such table") != std::string::npos;
      throw Error(missing_table ? ErrorKind::UnknownTable : ErrorKind::ParseError, "sqlite: " + msg);
    }
    return st;
  }
  [[noreturn]] void fail_stmt(sqlite3_stmt* st) {
    const std::string msg = sqlite3_errmsg(db_);
    sqlite3_finalize(st);
    throw Error(ErrorKind::IoError, "sqlite: " + msg);
  }

  sqlite3* db_ = nullptr;
};

}  // namespace

std::unique_ptr<SqlBackend> open_backend(const std::string& url) {
  constexpr std::string_view kSqlite = "sqlite:";
  if (url.rfind(kSqlite, 0) == 0) {
    const std::string rest = url.substr(kSqlite.size());
    return std::make_unique<SqliteBackend>(rest == ":memory:" || rest.empty() ? ":memory:" : rest);
  }
  throw Error(ErrorKind::InvalidConfig,
              "unsupported database URL '" + url + "'; this build bundles the sqlite: driver only "
              "(load the generated SQL script into other servers directly)");
}

}  // namespace dynaslide
