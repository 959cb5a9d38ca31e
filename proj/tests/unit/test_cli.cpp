#include <sstream>

#include "atesa/checkpoint.hpp"
#include "atesa/cli.hpp"
#include "atesa/corpus.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"

using namespace atesa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const fs::path& p) {
  const std::string s = read_file(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  const CliResult none = run({});
  CHECK(none.code == kExitUsage);
  CHECK(none.err.find("Usage") != std::string::npos);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"ingest", "--format", "mams"}).code == kExitUsage);
  CHECK(run({"stats", "--input"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitSuccess);
}

TEST_CASE("runtime failures exit 1 with a diagnostic") {
  const CliResult r = run({"stats", "--format", "mams", "--input", "/nonexistent.xml"});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("error:") == 0);
  CHECK(run({"stats", "--format", "tsv", "--input", "x"}).code == kExitFailure);
}

TEST_CASE("ingest and stats") {
  const std::string xml = (testing::data_dir() / "toy_mams.xml").string();
  const CliResult stats = run({"stats", "--format", "mams", "--input", xml});
  REQUIRE(stats.code == 0);
  const json j = json::parse(stats.out);
  CHECK(j.at("sentence_count") == 10);
  CHECK(j.at("opinion_count") == 20);
  CHECK(j.at("polarity_counts").at("positive") == 10);

  const CliResult ingest = run({"ingest", "--format", "mams", "--input", xml});
  REQUIRE(ingest.code == 0);
  CHECK(ingest.out == read_file(testing::data_dir() / "toy.ndjson"));
}

TEST_CASE("split, train, ensemble, analyze") {
  const fs::path dir = testing::scratch_dir("cli");
  const std::string data = (testing::data_dir() / "toy.ndjson").string();

  REQUIRE(run({"split", "--input", data, "--out-dir", (dir / "split").string()}).code == 0);
  CHECK(line_count(dir / "split" / "test.ndjson") == 2);
  CHECK(line_count(dir / "split" / "train.ndjson") == 8);

  const CliResult ft = run({"finetune", "--train", data, "--out", (dir / "enc").string(),
                            "--hidden-size", "16", "--lr", "1e-3", "--epochs", "1"});
  REQUIRE(ft.code == 0);
  CHECK(json::parse(ft.out).at("provenance").at("branch") == "ate");

  for (const std::string branch : {"ate", "atsa"}) {
    const CliResult tr =
        run({"train", "--branch", branch, "--train", data, "--encoder-checkpoint",
             (dir / "enc").string(), "--out", (dir / ("head-" + branch)).string(), "--lr", "1e-2",
             "--epochs", "3"});
    REQUIRE(tr.code == 0);
    CHECK(json::parse(tr.out).at("history").size() == 3);
    REQUIRE(run({"ensemble", "--branch", branch, "--member",
                 "m=" + (dir / ("head-" + branch)).string(), "--out",
                 (dir / (branch + ".json")).string()})
                .code == 0);
  }
  const CliResult an = run({"analyze", "--ate", (dir / "ate.json").string(), "--atsa",
                            (dir / "atsa.json").string(), "--text", testing::kFigureSentence});
  REQUIRE(an.code == 0);
  CHECK(json::parse(an.out).at("tokens").size() == 8);

  CHECK(run({"ensemble", "--member", (dir / "missing").string(), "--out",
             (dir / "x.json").string()})
            .code == kExitFailure);
  fs::remove_all(dir);
}

TEST_CASE("evaluate with one run writes one record") {
  const fs::path dir = testing::scratch_dir("evaluate");
  const CliResult r = run({"evaluate", "--data", (testing::data_dir() / "toy.ndjson").string(),
                           "--runs", "1", "--hidden-size", "8", "--records",
                           (dir / "runs.ndjson").string()});
  REQUIRE(r.code == 0);
  CHECK(line_count(dir / "runs.ndjson") == 1);
  CHECK(r.out.find("| Model") == 0);
  fs::remove_all(dir);
}
