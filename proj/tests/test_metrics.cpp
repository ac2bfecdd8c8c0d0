#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rdr/metrics.hpp"
#include "support/log_fixtures.hpp"
#include "support/naive_metrics.hpp"
#include "support/temp_dir.hpp"

using rdr::AnswerLog;
using rdr::Percent;
using rdr::PrsMode;
using testsup::FixtureQuestion;
using testsup::make_log;

namespace {

// Random but reproducible log: N views per question, answers drawn from a
// small alphabet, a_final = modal answer (majority-vote resolution).
AnswerLog random_log(int questions, int n_views, unsigned seed,
                     double correct_bias = 0.55) {
  std::mt19937 gen(seed);
  std::vector<FixtureQuestion> fs;
  static const char* kKinds[] = {"gaussian_noise", "salt_pepper", "motion_blur",
                                 "occlusion", "rotation"};
  static const char* kLevels[] = {"low", "medium", "high"};
  for (int i = 0; i < questions; ++i) {
    FixtureQuestion f;
    f.id = "q" + std::to_string(i);
    f.gt = "A";
    for (int v = 0; v <= n_views; ++v) {
      const bool right =
          std::uniform_real_distribution<>(0, 1)(gen) < correct_bias;
      f.canon.push_back(right ? "A"
                              : std::string(1, static_cast<char>('B' + gen() % 3)));
      if (v > 0) {
        f.kinds.push_back(kKinds[gen() % 5]);
        f.intensities.push_back(kLevels[gen() % 3]);
      }
    }
    f.wall_ms = 100 + gen() % 50;
    fs.push_back(std::move(f));
  }
  return make_log(fs);
}

}  // namespace

TEST_CASE("Percent: exact one-decimal rendering, half-up") {
  REQUIRE(Percent::of(1, 8).one_decimal() == "12.5");
  REQUIRE(Percent::of(125, 10000).one_decimal() == "1.3");   // 1.25 rounds up
  REQUIRE(Percent::of(124, 10000).one_decimal() == "1.2");
  REQUIRE(Percent::of(1, 1).one_decimal() == "100.0");
  REQUIRE(Percent::of(0, 7).one_decimal() == "0.0");
  REQUIRE(Percent::of(2, 3).one_decimal() == "66.7");
}

TEST_CASE("clean accuracy: direct cases") {
  const auto all = make_log({{"a", "A", {"A", "A"}, "", {}, {}},
                             {"b", "A", {"A", "B"}, "", {}, {}}});
  REQUIRE(rdr::clean_accuracy(all) == Percent::of(1, 1));

  const auto half = make_log({{"a", "A", {"A", "A"}, "", {}, {}},
                              {"b", "A", {"B", "A"}, "", {}, {}}});
  REQUIRE(rdr::clean_accuracy(half) == Percent::of(1, 2));
  REQUIRE(rdr::clean_accuracy(half).one_decimal() == "50.0");
}

TEST_CASE("clean accuracy: missing view 0 is a malformed log") {
  auto log = make_log({{"a", "A", {"A", "A"}, "", {}, {}}});
  log.questions[0].views.erase(log.questions[0].views.begin());
  REQUIRE_THROWS_AS(rdr::clean_accuracy(log), rdr::LogFormatError);
}

TEST_CASE("PRS per_view: three-row fixture recounted by hand") {
  // all-correct, one-wrong-view, all-wrong: exactly one robust question.
  const auto log = make_log({
      {"a", "A", {"A", "A", "A"}, "", {}, {}},
      {"b", "A", {"A", "B", "A"}, "", {}, {}},
      {"c", "A", {"B", "B", "B"}, "", {}, {}},
  });
  const auto p = rdr::prs(log, PrsMode::per_view);
  REQUIRE(p == Percent::of(1, 3));
  REQUIRE(p.one_decimal() == "33.3");
}

TEST_CASE("PRS: per_view and amcv_final diverge exactly as defined") {
  // View answers differ but the final answer is always right.
  const auto log = make_log({
      {"a", "A", {"A", "B", "A"}, "A", {}, {}},
      {"b", "A", {"B", "A", "B"}, "A", {}, {}},
  });
  REQUIRE(rdr::prs(log, PrsMode::amcv_final) == Percent::of(1, 1));
  REQUIRE(rdr::prs(log, PrsMode::per_view) == Percent::of(0, 1));
}

TEST_CASE("VDC: direct Eq evaluation") {
  const auto one = make_log({{"a", "A", {"X", "X", "Y"}, "", {}, {}}});
  REQUIRE(rdr::vdc(one) == Percent::of(2, 3));
  REQUIRE(rdr::vdc(one).one_decimal() == "66.7");

  // consistencies 1 and 8/11 -> mean 19/22 -> 86.3636...
  FixtureQuestion full;
  full.id = "a";
  full.gt = "A";
  full.canon.assign(11, "A");
  FixtureQuestion partial;
  partial.id = "b";
  partial.gt = "A";
  partial.canon.assign(8, "A");
  for (int i = 0; i < 3; ++i) partial.canon.push_back("B");
  const auto log = make_log({full, partial});
  const auto v = rdr::vdc(log);
  REQUIRE(v == Percent::of(19, 22));
  REQUIRE(v.value() == Catch::Approx(86.3636363636).epsilon(1e-9));
}

TEST_CASE("VDC: constant answers give 100") {
  const auto log = make_log({{"a", "Z", {"C", "C", "C", "C"}, "", {}, {}},
                             {"b", "Z", {"C", "C", "C", "C"}, "", {}, {}}});
  REQUIRE(rdr::vdc(log) == Percent::of(1, 1));
}

TEST_CASE("grade_question: agreement bit for view 0 is always set") {
  const auto log = make_log({{"a", "A", {"B", "A", "B"}, "A", {}, {}}});
  const auto g = rdr::grade_question(log.questions[0]);
  REQUIRE(g.agrees_with_clean[0]);
  REQUIRE_FALSE(g.correct[0]);
  REQUIRE(g.final_correct);
}

TEST_CASE("prs_breakdown: single-kind log collapses to one entry") {
  const auto log = make_log({
      {"a", "A", {"A", "A", "B"}, "", {"occlusion", "occlusion"}, {"low", "high"}},
      {"b", "A", {"A", "A", "A"}, "", {"occlusion", "occlusion"}, {"low", "high"}},
  });
  const auto by_kind = rdr::prs_breakdown(log, rdr::Facet::kind, PrsMode::per_view);
  REQUIRE(by_kind.size() == 1);
  REQUIRE(by_kind.at("occlusion") == Percent::of(1, 2));
}

TEST_CASE("prs_breakdown: errors isolated to one kind depress only it") {
  // occlusion views wrong everywhere; rotation views always right.
  const auto log = make_log({
      {"a", "A", {"A", "B", "A"}, "", {"occlusion", "rotation"}, {"low", "low"}},
      {"b", "A", {"A", "B", "A"}, "", {"occlusion", "rotation"}, {"high", "low"}},
  });
  const auto by_kind = rdr::prs_breakdown(log, rdr::Facet::kind, PrsMode::per_view);
  REQUIRE(by_kind.at("occlusion") == Percent::of(0, 2));
  REQUIRE(by_kind.at("rotation") == Percent::of(2, 2));
  REQUIRE(by_kind.at("occlusion").value() < by_kind.at("rotation").value());

  const auto by_level =
      rdr::prs_breakdown(log, rdr::Facet::intensity, PrsMode::per_view);
  // low intensity carries both an occlusion error (q a) and clean rotations.
  REQUIRE(by_level.at("low") == Percent::of(1, 2));
  REQUIRE(by_level.at("high") == Percent::of(0, 1));
}

TEST_CASE("prs_breakdown: the clean view is excluded from facets") {
  // Clean view wrong, the only tagged view right: faceted PRS must be 100.
  const auto log = make_log({{"a", "A", {"B", "A"}, "", {"rotation"}, {"low"}}});
  const auto by_kind = rdr::prs_breakdown(log, rdr::Facet::kind, PrsMode::per_view);
  REQUIRE(by_kind.at("rotation") == Percent::of(1, 1));
}

TEST_CASE("efficiency: call accounting means") {
  auto log = make_log({
      {"a", "A", {"A", "A"}, "", {}, {}, 11, 2000},
      {"b", "A", {"A", "A"}, "", {}, {}, 12, 1000},
  });
  const auto eff = rdr::efficiency(log);
  REQUIRE(eff.mean_calls == Catch::Approx(11.5));
  REQUIRE(eff.mean_wall_s == Catch::Approx(1.5));
}

TEST_CASE("failed questions are excluded from M and counted separately") {
  auto fs = std::vector<FixtureQuestion>{
      {"a", "A", {"A", "A"}, "", {}, {}},
      {"b", "A", {"B", "B"}, "", {}, {}},
  };
  fs[1].failed = true;
  const auto log = make_log(fs);
  REQUIRE(rdr::clean_accuracy(log) == Percent::of(1, 1));
  const auto report = rdr::compute_report(log, PrsMode::amcv_final);
  REQUIRE(report.m == 1);
  REQUIRE(report.failed_questions == 1);
}

TEST_CASE("an all-failed log has no gradable questions") {
  auto fs = std::vector<FixtureQuestion>{{"a", "A", {"A"}, "", {}, {}}};
  fs[0].failed = true;
  const auto log = make_log(fs);
  REQUIRE_THROWS_MATCHES(rdr::clean_accuracy(log), rdr::ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("no gradable")));
}

TEST_CASE("ordering invariants on randomized logs") {
  for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto log = random_log(40, 10, seed);
    const auto ca = rdr::clean_accuracy(log);
    const auto per_view = rdr::prs(log, PrsMode::per_view);
    const auto final_mode = rdr::prs(log, PrsMode::amcv_final);
    // all-views-correct implies the clean view is correct
    REQUIRE(per_view.value() <= ca.value() + 1e-12);
    // a_final is the mode; unanimous correctness forces a correct mode
    REQUIRE(final_mode.value() >= per_view.value() - 1e-12);
  }
}

TEST_CASE("naive double-loop oracle matches the module on random logs") {
  testsup::TempDir dir;
  for (unsigned seed : {11u, 22u, 33u}) {
    const auto log = random_log(200, 10, seed);
    const auto path = dir.path() / ("log_" + std::to_string(seed) + ".jsonl");
    testsup::write_log_file(log, path);

    const auto naive = testsup::naive_compute(path);
    const auto reloaded = rdr::AnswerLog::load(path);
    REQUIRE(std::abs(rdr::clean_accuracy(reloaded).value() - naive.ca) < 1e-9);
    REQUIRE(std::abs(rdr::prs(reloaded, PrsMode::per_view).value() -
                     naive.prs_per_view) < 1e-9);
    REQUIRE(std::abs(rdr::prs(reloaded, PrsMode::amcv_final).value() -
                     naive.prs_final) < 1e-9);
    REQUIRE(std::abs(rdr::vdc(reloaded).value() - naive.vdc) < 1e-9);
    REQUIRE(naive.m == 200);
  }
}

TEST_CASE("log writer/loader round trip preserves records") {
  testsup::TempDir dir;
  const auto log = random_log(10, 6, 77);
  const auto path = dir.path() / "log.jsonl";
  testsup::write_log_file(log, path);
  const auto back = rdr::AnswerLog::load(path);
  REQUIRE(back.questions.size() == log.questions.size());
  for (std::size_t i = 0; i < back.questions.size(); ++i) {
    REQUIRE(back.questions[i].summary.to_json() ==
            log.questions[i].summary.to_json());
    REQUIRE(back.questions[i].views.size() == log.questions[i].views.size());
    for (std::size_t v = 0; v < back.questions[i].views.size(); ++v) {
      REQUIRE(back.questions[i].views[v].to_json() ==
              log.questions[i].views[v].to_json());
    }
  }
}

TEST_CASE("log loader rejects orphan views and duplicate summaries") {
  testsup::TempDir dir;
  const auto path = dir.path() / "bad.jsonl";
  {
    const auto log = make_log({{"a", "A", {"A"}, "", {}, {}}});
    testsup::write_log_file(log, path);
    std::ofstream app(path, std::ios::app);
    rdr::ViewRecord orphan;
    orphan.question_id = "ghost";
    app << orphan.to_json().dump() << '\n';
  }
  REQUIRE_THROWS_AS(rdr::AnswerLog::load(path), rdr::LogFormatError);
}
