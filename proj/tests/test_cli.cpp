#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dynaslide/json_io.hpp"

namespace fs = std::filesystem;
using dynaslide::Json;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / ("dynaslide_cli_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

struct CliRun {
  int code = -1;
  std::string err;
};

CliRun run(const std::string& args) {
  const fs::path err = workdir() / "stderr.txt";
  const std::string cmd = "cd '" + workdir().string() + "' && '" + DYNASLIDE_CLI + "' " + args + " >/dev/null 2>'" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("build-bench --bogus 1").code, 2);
  EXPECT_EQ(run("run-agent --mode sideways").code, 2);
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("gen-data --cities ' , ' --out x.ndjson").code, 2);
}

TEST(Cli, RuntimeErrorsExitOneWithJson) {
  const CliRun r = run("--json build-bench --count 2 --out tiny");
  EXPECT_EQ(r.code, 1);
  const Json j = Json::parse(r.err);
  EXPECT_EQ(j.at("error"), "InsufficientSubtemplates");
  EXPECT_EQ(j.at("exit_code"), 1);
  EXPECT_EQ(run("validate --path does-not-exist.json").code, 1);
}

TEST(Cli, EndToEndWithConfigFile) {
  ASSERT_EQ(run("gen-data --seed 4 --cities Beijing,Shenzhen --blocks-per-city 3 --out corpus.ndjson").code, 0);
  {
    std::ofstream cfg(workdir() / "bench.toml");
    cfg << "[build-bench]\ncount = 24\nseed = 9\ndata = \"corpus.ndjson\"\nout = \"bench\"\n";
  }
  ASSERT_EQ(run("--config bench.toml build-bench").code, 0);
  const Json manifest = dynaslide::read_json_file((workdir() / "bench" / "manifest.json").string());
  EXPECT_EQ(manifest.at("count"), 24);
  EXPECT_EQ(manifest.at("seed"), 9);

  EXPECT_EQ(run("run-agent --provider replay --bench bench --out r0").code, 2);
  ASSERT_EQ(run("run-agent --bench bench --split all --mode open --record fixtures --out r1").code, 0);
  ASSERT_EQ(run("run-agent --bench bench --split all --mode open --provider replay --fixtures fixtures --out r2").code,
            0);
  ASSERT_EQ(run("evaluate --pred r1 --pred r2 --gold bench --out report").code, 0);
  const Json rep = dynaslide::read_json_file((workdir() / "report" / "report.json").string());
  EXPECT_EQ(rep.at("cases"), 48);
  EXPECT_EQ(rep.at("task_success").at("overall").at("open").at("success_rate"), 100.0);

  for (const char* p : {"bench", "bench/manifest.json", "r1/traces.jsonl", "corpus.ndjson", "bench/slides/t00001_target.json"}) {
    ASSERT_TRUE(fs::exists(workdir() / p)) << p;
    EXPECT_EQ(run(std::string("validate --path ") + p).code, 0) << p;
  }
  {
    std::ofstream bad(workdir() / "broken.json");
    bad << "{\"elements\": 3}";
  }
  EXPECT_EQ(run("validate --path broken.json").code, 1);
}
