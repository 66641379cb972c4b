// Command-line entry point: gen-data, build-bench, run-agent, evaluate, validate.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <set>

#include "dynaslide/agent.hpp"
#include "dynaslide/bench.hpp"
#include "dynaslide/datastore.hpp"
#include "dynaslide/eval.hpp"
#include "dynaslide/parallel.hpp"
#include "dynaslide/templates.hpp"

namespace fs = std::filesystem;
using namespace dynaslide;

namespace {

bool g_json_errors = false;

int fail(int code, const std::string& kind, const std::string& message) {
  if (g_json_errors) {
    std::cerr << Json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << "\n";
  } else {
    std::cerr << "error: " << message << "\n";
  }
  return code;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(normalize_name(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(normalize_name(cur));
  return out;
}

const TemplatePack& pack_from(const std::string& dir, TemplatePack& storage) {
  if (dir.empty()) return default_pack();
  storage = load_pack(dir);
  validate_pack(storage);
  return storage;
}

// ---------------------------------------------------------------------------

struct GenDataOpts {
  std::uint64_t seed = 1;
  std::string cities = "Beijing,Guangzhou,Shenzhen";
  int blocks_per_city = 4;
  int records_per_block = 500;
  std::string out = "corpus.ndjson";
  std::string format = "ndjson";
};

int cmd_gen_data(const GenDataOpts& o, int jobs) {
  CorpusConfig cfg;
  cfg.seed = o.seed;
  cfg.cities = split_list(o.cities);
  cfg.blocks_per_city = o.blocks_per_city;
  cfg.records_per_block = o.records_per_block;
  const auto records = clean_and_filter(generate_synthetic_records(cfg, jobs));
  if (o.format == "sql") {
    write_text_file(o.out, to_sql_script(records));
  } else {
    write_text_file(o.out, to_ndjson(records));
  }
  if (const char* url = std::getenv("DYNASLIDE_DB_URL")) {
    open_backend(url)->load(Store(records));
  }
  std::cout << "wrote " << records.size() << " records to " << o.out << "\n";
  return 0;
}

struct BuildOpts {
  std::size_t count = 200;
  std::uint64_t seed = 7;
  std::string pack;
  std::string data;
  std::string out = "bench";
  double customized_share = 0.35;
};

int cmd_build_bench(const BuildOpts& o, int jobs) {
  TemplatePack storage;
  const TemplatePack& pack = pack_from(o.pack, storage);
  Store store;
  if (o.data.empty()) {
    CorpusConfig cfg;
    cfg.seed = o.seed;
    store = Store(clean_and_filter(generate_synthetic_records(cfg, jobs)));
  } else {
    store = Store(clean_and_filter(from_ndjson(read_text_file(o.data))));
  }
  BenchConfig bc;
  bc.count = o.count;
  bc.seed = o.seed;
  bc.customized_share = o.customized_share;
  bc.jobs = jobs;
  const Dataset d = build_dataset(bc, pack, store);
  write_dataset(d, store, o.out);
  std::cout << "wrote " << d.triples.size() << " triples to " << o.out << " (train " << d.splits.train.size()
            << ", val " << d.splits.val.size() << ", test " << d.splits.test.size() << ")\n";
  return 0;
}

struct RunOpts {
  std::string bench = "bench";
  std::string split = "test";
  std::string mode = "closed";
  std::string provider = "oracle";
  std::string fixtures;
  std::string record;
  std::string out = "run";
  bool provider_sql = false;
};

int cmd_run_agent(const RunOpts& o, int jobs) {
  const LogicMode mode = parse_logic_mode(o.mode);
  const LoadedBench b = load_dataset(o.bench);
  std::vector<const Triple*> cases;
  for (const auto& t : b.triples) {
    if (o.split == "all" || t.split == o.split) cases.push_back(&t);
  }
  std::unique_ptr<ModelProvider> shared;
  if (o.provider == "replay") {
    if (o.fixtures.empty()) throw Error(ErrorKind::InvalidConfig, "--fixtures is required for the replay provider");
    shared = std::make_unique<ReplayProvider>(o.fixtures);
  } else if (o.provider == "remote") {
    shared = std::make_unique<RemoteProvider>(remote_config_from_env());
  } else if (o.provider != "oracle") {
    throw Error(ErrorKind::InvalidConfig, "unknown provider '" + o.provider + "'");
  }
  PipelineOptions popts;
  popts.mode = mode;
  popts.provider_sql = o.provider_sql;

  std::vector<PipelineResult> results(cases.size());
  parallel_for(cases.size(), jobs, [&](std::size_t i) {
    const Triple& t = *cases[i];
    std::unique_ptr<ModelProvider> oracle;
    ModelProvider* p = shared.get();
    if (!p) {
      oracle = std::make_unique<OracleProvider>(default_pack(), t.metadata);
      p = oracle.get();
    }
    std::unique_ptr<RecordingProvider> rec;
    if (!o.record.empty()) {
      rec = std::make_unique<RecordingProvider>(*p, o.record);
      p = rec.get();
    }
    results[i] = run_pipeline(t.source, t.instruction, b.store, *p, popts);
  });

  const fs::path root(o.out);
  fs::create_directories(root / "predictions");
  std::string jsonl;
  Json index = Json::array();
  std::size_t produced = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const Triple& t = *cases[i];
    jsonl += traces_to_jsonl(t.id, results[i].traces);
    Json entry = {{"id", t.id}};
    const fs::path pred = root / "predictions" / (t.id + ".json");
    if (results[i].slide) {
      write_text_file(pred.string(), to_json(*results[i].slide).dump(2) + "\n");
      entry["prediction"] = "predictions/" + t.id + ".json";
      ++produced;
    } else {
      fs::remove(pred);
      entry["prediction"] = nullptr;
    }
    index.push_back(entry);
  }
  write_text_file((root / "traces.jsonl").string(), jsonl);
  const Json run = {{"format_version", kFormatVersion},
                    {"bench", fs::absolute(o.bench).lexically_normal().string()},
                    {"split", o.split},
                    {"mode", o.mode},
                    {"provider", o.provider},
                    {"cases", index}};
  write_text_file((root / "run.json").string(), run.dump(2) + "\n");
  std::cout << "ran " << cases.size() << " cases (" << produced << " slides produced) into " << o.out << "\n";
  return 0;
}

struct EvalOpts {
  std::vector<std::string> pred;
  std::string gold = "bench";
  std::string out = "report";
};

int cmd_evaluate(const EvalOpts& o, int jobs) {
  const LoadedBench b = load_dataset(o.gold);
  std::map<std::string, const Triple*> by_id;
  for (const auto& t : b.triples) by_id[t.id] = &t;
  std::vector<EvalCase> cases;
  for (const auto& dir : o.pred) {
    const fs::path root(dir);
    const Json run = read_json_file((root / "run.json").string());
    const LogicMode mode = parse_logic_mode(run.at("mode").get<std::string>());
    std::map<std::string, std::vector<StageTrace>> traces;
    const std::string jsonl = read_text_file((root / "traces.jsonl").string());
    std::size_t start = 0;
    while (start < jsonl.size()) {
      auto end = jsonl.find('\n', start);
      if (end == std::string::npos) end = jsonl.size();
      if (end > start) {
        const Json line = parse_json_text(std::string_view(jsonl).substr(start, end - start));
        traces[line.at("case").get<std::string>()].push_back(trace_from_json(line));
      }
      start = end + 1;
    }
    for (const auto& entry : run.at("cases")) {
      const std::string id = entry.at("id").get<std::string>();
      auto it = by_id.find(id);
      if (it == by_id.end()) throw Error(ErrorKind::SchemaViolation, "prediction for unknown case " + id);
      EvalCase c;
      c.id = id;
      c.theme_id = it->second->theme_id;
      c.function_id = it->second->function_id;
      c.scenario = it->second->scenario;
      c.mode = mode;
      c.gold = it->second->target;
      c.gold_meta = it->second->metadata;
      if (!entry.at("prediction").is_null()) {
        c.pred = slide_from_json(read_json_file((root / entry["prediction"].get<std::string>()).string()));
      }
      c.traces = traces[id];
      cases.push_back(std::move(c));
    }
  }
  std::vector<CaseScore> scores(cases.size());
  parallel_for(cases.size(), jobs, [&](std::size_t i) { scores[i] = score_case(cases[i], b.store); });
  const Report r = report(scores);
  fs::create_directories(o.out);
  write_text_file((fs::path(o.out) / "report.json").string(), r.json.dump(2) + "\n");
  write_text_file((fs::path(o.out) / "report.txt").string(), r.text);
  std::cout << r.text;
  return 0;
}

// Checks a file against the schema its content declares. Returns the name of
// the artifact kind on success.
std::string validate_path(const std::string& path) {
  const fs::path p(path);
  if (fs::is_directory(p)) {
    if (fs::exists(p / "manifest.json")) {
      load_dataset(path);
      return "benchmark";
    }
    validate_pack(load_pack(path));
    return "template pack";
  }
  const std::string ext = p.extension().string();
  if (ext == ".ndjson") {
    const auto records = from_ndjson(read_text_file(path));
    for (const auto& r : records) validate_record(r.record);
    return "corpus";
  }
  if (ext == ".jsonl") {
    const std::string text = read_text_file(path);
    std::map<std::string, std::size_t> per_case;
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      if (end > start) {
        const Json line = parse_json_text(std::string_view(text).substr(start, end - start));
        trace_from_json(line);
        ++per_case[line.value("case", std::string())];
      }
      start = end + 1;
    }
    for (const auto& [id, n] : per_case) {
      if (n != kStages.size()) throw Error(ErrorKind::IncompleteTrace, id + " has " + std::to_string(n) + " traces");
    }
    return "traces";
  }
  if (ext == ".svg") {
    const std::string text = read_text_file(path);
    if (text.find("<svg") == std::string::npos || text.find("</svg>") == std::string::npos) {
      throw Error(ErrorKind::SchemaViolation, "not an SVG document");
    }
    return "chart";
  }
  const Json j = read_json_file(path);
  if (j.contains("triples")) {
    load_dataset(p.parent_path().string());
    return "manifest";
  }
  if (j.contains("elements")) {
    validate_slide(slide_from_json(j));
    return "slide";
  }
  if (j.contains("slide_filters")) {
    const SlideMetadata m = metadata_from_json(j);
    validate_filters(default_pack(), m.slide_filters);
    state_from_filters(m.slide_filters, LogicMode::closed);
    if (m.query_filters) validate_filters(default_pack(), *m.query_filters);
    if (m.update_filters) {
      validate_filters(default_pack(), *m.update_filters);
      state_from_filters(*m.update_filters, LogicMode::closed);
    }
    return "metadata";
  }
  if (j.contains("header_aliases") && j.contains("field_mapping")) {
    parse_pack(j, Json{{"format_version", kFormatVersion}, {"pack_version", "probe"}, {"themes", Json::array()},
                       {"subtemplates", Json::array()}, {"templates", Json::array()}});
    return "dictionaries";
  }
  if (j.contains("slots") && j.contains("logic")) {
    parameter_state_from_json(j);
    return "parameter state";
  }
  throw Error(ErrorKind::SchemaViolation, "unrecognised artifact");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynaslide: database-grounded slide update benchmark and agent"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file, one [section] per subcommand; explicit flags take precedence");
  int jobs = default_jobs();
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--json", g_json_errors, "print errors as JSON on stderr");

  GenDataOpts gd;
  auto* gen = app.add_subcommand("gen-data", "generate and clean the synthetic transaction corpus");
  gen->add_option("--seed", gd.seed);
  gen->add_option("--cities", gd.cities, "comma-separated city list");
  gen->add_option("--blocks-per-city", gd.blocks_per_city);
  gen->add_option("--records-per-block", gd.records_per_block);
  gen->add_option("--out", gd.out);
  gen->add_option("--format", gd.format)->check(CLI::IsMember({"ndjson", "sql"}));

  BuildOpts bo;
  auto* build = app.add_subcommand("build-bench", "generate instruction-execution triples and splits");
  build->add_option("--count", bo.count);
  build->add_option("--seed", bo.seed);
  build->add_option("--pack", bo.pack, "template pack directory (default: built-in pack)");
  build->add_option("--data", bo.data, "corpus NDJSON (default: generated from --seed)");
  build->add_option("--out", bo.out);
  build->add_option("--customized-share", bo.customized_share)->check(CLI::Range(0.0, 1.0));

  RunOpts ro;
  auto* run = app.add_subcommand("run-agent", "run the update agent over a benchmark split");
  run->add_option("--bench", ro.bench);
  run->add_option("--split", ro.split)->check(CLI::IsMember({"train", "val", "test", "all"}));
  run->add_option("--mode", ro.mode)->check(CLI::IsMember({"closed", "open"}));
  run->add_option("--provider", ro.provider)->check(CLI::IsMember({"oracle", "replay", "remote"}));
  run->add_option("--fixtures", ro.fixtures, "replay fixture directory");
  run->add_option("--record", ro.record, "write every provider response as a replay fixture");
  run->add_flag("--provider-sql", ro.provider_sql, "ask the provider for SQL instead of compiling it");
  run->add_option("--out", ro.out);

  EvalOpts eo;
  auto* eval = app.add_subcommand("evaluate", "score predictions against gold triples");
  eval->add_option("--pred", eo.pred, "run-agent output directories")->required();
  eval->add_option("--gold", eo.gold, "benchmark directory");
  eval->add_option("--out", eo.out);

  std::string vpath;
  auto* val = app.add_subcommand("validate", "check an artifact against its schema");
  val->add_option("--path", vpath)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (g_json_errors) return fail(2, "UsageError", e.what());
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(gd, jobs);
    if (*build) return cmd_build_bench(bo, jobs);
    if (*run) return cmd_run_agent(ro, jobs);
    if (*eval) return cmd_evaluate(eo, jobs);
    if (*val) {
      const std::string kind = validate_path(vpath);
      if (g_json_errors) {
        std::cout << Json{{"valid", true}, {"kind", kind}, {"path", vpath}}.dump() << "\n";
      } else {
        std::cout << vpath << ": valid " << kind << "\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    const bool usage = e.kind() == ErrorKind::InvalidConfig;
    return fail(usage ? 2 : 1, std::string(to_string(e.kind())), e.what());
  } catch (const std::exception& e) {
    return fail(1, "Failure", e.what());
  }
  return 2;
}
