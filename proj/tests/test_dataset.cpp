#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <set>

#include "rdr/dataset.hpp"
#include "rdr/oracle.hpp"
#include "rdr/synth.hpp"
#include "support/temp_dir.hpp"

using rdr::AnswerType;
using rdr::QuestionRecord;

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
  return rdr::read_file_bytes(p);
}

}  // namespace

TEST_CASE("load_manifest: empty file gives empty list") {
  testsup::TempDir dir;
  const auto p = dir.path() / "m.jsonl";
  std::ofstream(p) << "";
  REQUIRE(rdr::load_manifest(p).empty());
}

TEST_CASE("load_manifest: invalid ground truth letter names the line") {
  testsup::TempDir dir;
  const auto p = dir.path() / "m.jsonl";
  {
    std::ofstream out(p);
    QuestionRecord ok;
    ok.id = "a";
    ok.image_path = "a.png";
    ok.question_text = "?";
    ok.answer_type = AnswerType::multiple_choice;
    ok.choices = {"x", "y", "z", "w"};
    ok.ground_truth = "A";
    ok.domain = "Biology";
    out << ok.to_json().dump() << '\n';
    auto bad = ok.to_json();
    bad["id"] = "b";
    bad["ground_truth"] = "F";
    out << bad.dump() << '\n';
  }
  try {
    rdr::load_manifest(p);
    FAIL("expected ValidationError");
  } catch (const rdr::ValidationError& e) {
    REQUIRE(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("load_manifest: duplicate ids rejected") {
  testsup::TempDir dir;
  const auto p = dir.path() / "m.jsonl";
  QuestionRecord q;
  q.id = "dup";
  q.image_path = "a.png";
  q.question_text = "?";
  q.answer_type = AnswerType::short_answer;
  q.ground_truth = "yes";
  q.domain = "Physics";
  std::ofstream(p) << q.to_json().dump() << '\n' << q.to_json().dump() << '\n';
  REQUIRE_THROWS_AS(rdr::load_manifest(p), rdr::ValidationError);
}

TEST_CASE("manifest round trip preserves all fields") {
  testsup::TempDir dir;
  const auto records = rdr::synth_generate(7, 99, dir.path());
  const auto p = dir.path() / "manifest.jsonl";
  rdr::save_manifest(records, p);
  const auto back = rdr::load_manifest(p);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].to_json() == records[i].to_json());
  }
}

TEST_CASE("synth_generate: deterministic, margins enforced") {
  testsup::TempDir a, b;
  const auto ra = rdr::synth_generate(12, 7, a.path());
  const auto rb = rdr::synth_generate(12, 7, b.path());
  REQUIRE(ra.size() == 12);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    REQUIRE(ra[i].to_json() == rb[i].to_json());
    REQUIRE(slurp(a.path() / ra[i].image_path) ==
            slurp(b.path() / rb[i].image_path));
    // distinct heights with at least 10 px separation
    const auto& schema = *ra[i].render_schema;
    for (std::size_t m = 0; m < schema.bars.size(); ++m) {
      for (std::size_t n = m + 1; n < schema.bars.size(); ++n) {
        const double gap = std::abs(schema.bars[m].value - schema.bars[n].value) *
                           schema.px_per_unit;
        REQUIRE(gap >= 10.0);
      }
    }
  }
}

TEST_CASE("scripted oracle answers every clean synthetic question correctly") {
  testsup::TempDir dir;
  const auto records = rdr::synth_generate(30, 123, dir.path());
  std::set<AnswerType> seen;
  for (const auto& q : records) {
    const rdr::Image img = rdr::load_png(dir.path() / q.image_path);
    REQUIRE(rdr::scripted_oracle_infer(img, q) == q.ground_truth);
    seen.insert(q.answer_type);
  }
  REQUIRE(seen.size() == 3);  // all three question kinds exercised
}

TEST_CASE("scripted oracle stays total when the tallest bar is occluded") {
  testsup::TempDir dir;
  const auto records = rdr::synth_generate(3, 5, dir.path());
  const auto& q = records[0];  // tallest-bar question
  REQUIRE(q.answer_type == AnswerType::multiple_choice);
  rdr::Image img = rdr::load_png(dir.path() / q.image_path);
  const auto& schema = *q.render_schema;
  int best = 0;
  for (std::size_t b = 1; b < schema.bars.size(); ++b) {
    if (schema.bars[b].value > schema.bars[best].value) best = static_cast<int>(b);
  }
  const auto& bar = schema.bars[best];
  for (int y = 0; y < schema.baseline_y; ++y) {
    for (int x = bar.x0; x < bar.x1; ++x) img.set(x, y, 128, 128, 128);
  }
  const std::string ans = rdr::scripted_oracle_infer(img, q);
  REQUIRE_FALSE(ans.empty());
  REQUIRE(ans != bar.label);  // the occluded bar can no longer win
}

TEST_CASE("oracle rejects questions without a schema") {
  QuestionRecord q;
  q.id = "x";
  q.image_path = "x.png";
  q.question_text = "Which bar is the tallest?";
  q.answer_type = AnswerType::multiple_choice;
  q.choices = {"A", "B"};
  q.ground_truth = "A";
  q.domain = "Physics";
  const rdr::Image img = rdr::Image::filled(8, 8, 0, 0, 0);
  REQUIRE_THROWS_AS(rdr::scripted_oracle_infer(img, q),
                    rdr::UnsupportedQuestionError);
}

TEST_CASE("augment: coverage, replayability, integrity") {
  testsup::TempDir src, out_a, out_b;
  const auto records = rdr::synth_generate(3, 11, src.path());

  const auto m1 = rdr::augment(records, 42, 10, rdr::IntensityTable::defaults(),
                               src.path(), out_a.path());
  REQUIRE(m1.questions.size() == 3);
  REQUIRE(m1.failures.empty());

  for (const auto& q : m1.questions) {
    REQUIRE(q.views.size() == 10);
    std::set<rdr::PerturbationKind> kinds;
    for (const auto& v : q.views) kinds.insert(v.kind);
    REQUIRE(kinds.size() == 5);
    // referential integrity: all paths exist and decode
    REQUIRE_NOTHROW(rdr::load_png(out_a.path() / q.clean_path));
    for (const auto& v : q.views) {
      REQUIRE_NOTHROW(rdr::load_png(out_a.path() / v.path));
    }
  }

  // Re-run into a second directory: byte-identical tree.
  rdr::augment(records, 42, 10, rdr::IntensityTable::defaults(), src.path(),
               out_b.path());
  for (const auto& q : m1.questions) {
    REQUIRE(slurp(out_a.path() / q.clean_path) ==
            slurp(out_b.path() / q.clean_path));
    for (const auto& v : q.views) {
      REQUIRE(slurp(out_a.path() / v.path) == slurp(out_b.path() / v.path));
    }
  }
  REQUIRE(slurp(out_a.path() / "manifest.json") ==
          slurp(out_b.path() / "manifest.json"));

  // And a true idempotence check: re-running into the same directory leaves
  // identical bytes behind.
  rdr::augment(records, 42, 10, rdr::IntensityTable::defaults(), src.path(),
               out_a.path());
  REQUIRE(slurp(out_a.path() / "manifest.json") ==
          slurp(out_b.path() / "manifest.json"));
}

TEST_CASE("augment: n_views=15 renders the full grid") {
  testsup::TempDir src, out;
  const auto records = rdr::synth_generate(1, 3, src.path());
  const auto m = rdr::augment(records, 1, 15, rdr::IntensityTable::defaults(),
                              src.path(), out.path());
  REQUIRE(m.questions.at(0).views.size() == 15);
  std::set<std::pair<rdr::PerturbationKind, rdr::IntensityLevel>> cells;
  for (const auto& v : m.questions[0].views) cells.insert({v.kind, v.intensity});
  REQUIRE(cells.size() == 15);
}

TEST_CASE("augment: undecodable image is reported, run continues") {
  testsup::TempDir src, out;
  auto records = rdr::synth_generate(2, 8, src.path());
  std::ofstream(src.path() / records[0].image_path, std::ios::trunc)
      << "not a png";
  const auto m = rdr::augment(records, 9, 10, rdr::IntensityTable::defaults(),
                              src.path(), out.path());
  REQUIRE(m.questions.size() == 1);
  REQUIRE(m.failures.size() == 1);
  REQUIRE(m.failures[0].id == records[0].id);
  REQUIRE_FALSE(m.failures[0].error.empty());
}

TEST_CASE("augmented manifest json round trip") {
  testsup::TempDir src, out;
  const auto records = rdr::synth_generate(2, 21, src.path());
  const auto m = rdr::augment(records, 5, 8, rdr::IntensityTable::defaults(),
                              src.path(), out.path());
  const auto loaded = rdr::AugmentedManifest::load(out.path() / "manifest.json");
  REQUIRE(loaded.to_json() == m.to_json());
}
