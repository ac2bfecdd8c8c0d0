#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "rdr/answer_log.hpp"
#include "rdr/cli.hpp"
#include "support/log_compare.hpp"
#include "support/temp_dir.hpp"

using testsup::file_text;
using testsup::normalized_log_text;

namespace {

int cli(std::initializer_list<std::string> args) {
  return rdr::run_cli(std::vector<std::string>(args));
}

std::string str(const std::filesystem::path& p) { return p.string(); }

}  // namespace

TEST_CASE("cli: synth is deterministic and writes a loadable manifest") {
  testsup::TempDir a, b;
  REQUIRE(cli({"synth", "--count", "5", "--seed", "9", "--out",
               str(a.path())}) == 0);
  REQUIRE(cli({"synth", "--count", "5", "--seed", "9", "--out",
               str(b.path())}) == 0);

  REQUIRE(file_text(a.path() / "manifest.jsonl") ==
          file_text(b.path() / "manifest.jsonl"));
  const auto records = rdr::load_manifest(a.path() / "manifest.jsonl");
  REQUIRE(records.size() == 5);
  REQUIRE(file_text(a.path() / records[0].image_path) ==
          file_text(b.path() / records[0].image_path));
}

TEST_CASE("cli: missing required flag is a usage error") {
  REQUIRE(cli({"synth", "--count", "3"}) != 0);  // no --out
  REQUIRE(cli({"bogus-command"}) != 0);
}

TEST_CASE("cli: perturb rejects a view count beyond the grid") {
  testsup::TempDir data, out;
  REQUIRE(cli({"synth", "--count", "1", "--out", str(data.path())}) == 0);
  REQUIRE(cli({"perturb", "--manifest", str(data.path() / "manifest.jsonl"),
               "--views", "20", "--out", str(out.path())}) == 2);
}

TEST_CASE("cli: full pipeline synth -> perturb -> eval -> report") {
  testsup::TempDir root;
  const auto data = root.path() / "data";
  const auto views = root.path() / "views";
  const auto run = root.path() / "run";
  const auto rep = root.path() / "report";

  REQUIRE(cli({"synth", "--count", "6", "--seed", "13", "--out", str(data)}) == 0);
  REQUIRE(cli({"perturb", "--manifest", str(data / "manifest.jsonl"), "--views",
               "8", "--seed", "13", "--out", str(views)}) == 0);
  REQUIRE(cli({"eval", "--augmented", str(views), "--backend", "oracle",
               "--mode", "full_amcv", "--tau", "0.6", "--out", str(run)}) == 0);
  REQUIRE(std::filesystem::exists(run / "answers.jsonl"));
  REQUIRE(std::filesystem::exists(run / "run_config.json"));

  const auto log = rdr::AnswerLog::load(run / "answers.jsonl");
  REQUIRE(log.questions.size() == 6);
  for (const auto& q : log.questions) {
    REQUIRE(q.views.size() == 9);  // clean + 8 perturbed
    const int expected = 9 + (q.summary.triggered_correction ? 1 : 0);
    REQUIRE(q.summary.total_calls == expected);
  }

  REQUIRE(cli({"report", "--log", "oracle=" + str(run / "answers.jsonl"),
               "--ablation-from", str(run / "answers.jsonl"), "--row",
               "GPT-4V=85.2,72.1,78.5", "--out", str(rep)}) == 0);
  const auto md = file_text(rep / "report.md");
  REQUIRE(md.find("## Overall") != std::string::npos);
  REQUIRE(md.find("## Resolution ablation") != std::string::npos);
  REQUIRE(md.find("| GPT-4V | 85.2 | 72.1 | 78.5 |") != std::string::npos);
  REQUIRE(std::filesystem::exists(rep / "report.csv"));
  REQUIRE(std::filesystem::exists(rep / "metrics_oracle.json"));
}

TEST_CASE("cli: single_view mode performs exactly one call per question") {
  testsup::TempDir root;
  const auto data = root.path() / "data";
  const auto views = root.path() / "views";
  const auto run = root.path() / "run";
  REQUIRE(cli({"synth", "--count", "3", "--out", str(data)}) == 0);
  REQUIRE(cli({"perturb", "--manifest", str(data / "manifest.jsonl"), "--out",
               str(views)}) == 0);
  REQUIRE(cli({"eval", "--augmented", str(views), "--backend", "oracle",
               "--mode", "single_view", "--out", str(run)}) == 0);
  const auto log = rdr::AnswerLog::load(run / "answers.jsonl");
  for (const auto& q : log.questions) {
    REQUIRE(q.summary.total_calls == 1);
    REQUIRE(q.views.size() == 1);
  }
}

TEST_CASE("cli: stub eval warms a cache that replay can serve verbatim") {
  testsup::TempDir root;
  const auto data = root.path() / "data";
  const auto views = root.path() / "views";
  const auto cache = root.path() / "cache";
  const auto run_live = root.path() / "live";
  const auto run_replay = root.path() / "replay";

  REQUIRE(cli({"synth", "--count", "4", "--out", str(data)}) == 0);
  REQUIRE(cli({"perturb", "--manifest", str(data / "manifest.jsonl"), "--out",
               str(views)}) == 0);
  REQUIRE(cli({"eval", "--augmented", str(views), "--backend", "stub",
               "--stub-answer", "B", "--model", "stub-constant", "--cache-dir",
               str(cache), "--out", str(run_live)}) == 0);
  REQUIRE(cli({"eval", "--augmented", str(views), "--backend", "replay",
               "--model", "stub-constant", "--cache-dir", str(cache), "--out",
               str(run_replay)}) == 0);

  REQUIRE(normalized_log_text(run_live / "answers.jsonl") ==
          normalized_log_text(run_replay / "answers.jsonl"));
}

TEST_CASE("cli: report on an empty log fails with no gradable questions") {
  testsup::TempDir dir;
  const auto log = dir.path() / "empty.jsonl";
  std::ofstream(log) << "";
  const auto out = dir.path() / "rep";
  REQUIRE(cli({"report", "--log", "x=" + str(log), "--out", str(out)}) == 2);
}
