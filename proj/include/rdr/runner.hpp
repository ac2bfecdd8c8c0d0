#pragma once

// Evaluation driver: walks an augmented manifest, runs the multi-view
// orchestration per question against a backend, and appends log records.
// Questions run concurrently, but blocks are committed to the log in
// manifest order, so two runs of the same configuration produce the same
// bytes (latency fields aside).

#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "rdr/amcv.hpp"
#include "rdr/answer_log.hpp"
#include "rdr/dataset.hpp"
#include "rdr/parallel.hpp"

namespace rdr {

struct EvalStats {
  int questions = 0;
  int failed = 0;
  long long total_calls = 0;
};

namespace runner_detail {

struct QuestionBlock {
  std::vector<ViewRecord> views;
  SummaryRecord summary;
  std::exception_ptr error;  // config-level abort
};

inline QuestionBlock evaluate_question(const AugmentedQuestion& aq,
                                       const std::filesystem::path& base_dir,
                                       ModelBackend& backend,
                                       const OrchestratorConfig& cfg) {
  QuestionBlock block;
  const QuestionRecord& q = aq.question;

  std::vector<ViewInput> views;
  views.push_back({0, "clean", "", read_file_bytes(base_dir / aq.clean_path)});
  for (const auto& v : aq.views) {
    views.push_back({v.view_index, to_string(v.kind), to_string(v.intensity),
                     read_file_bytes(base_dir / v.path)});
  }

  const MultiViewResult result = run_multi_view(q, views, backend, cfg);

  for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
    ViewRecord rec;
    rec.question_id = q.id;
    rec.view_index = views[i].view_index;
    rec.kind = views[i].kind;
    rec.intensity = views[i].intensity;
    rec.digest = result.outcomes[i].digest;
    rec.raw = result.outcomes[i].response.raw_text;
    rec.canonical = i < result.answers.answers.size()
                        ? result.answers.answers[i].canonical
                        : std::string();
    rec.latency_ms = result.outcomes[i].response.latency_ms;
    rec.from_cache = result.outcomes[i].response.from_cache;
    block.views.push_back(std::move(rec));
  }

  SummaryRecord& s = block.summary;
  s.question_id = q.id;
  s.n_views = cfg.resolution_mode == ResolutionMode::single_view
                  ? 0
                  : static_cast<int>(aq.views.size());
  s.answer_type = q.answer_type;
  s.ground_truth = q.ground_truth;
  s.gt_canonical = normalize_answer(q.ground_truth, q.answer_type,
                                    q.choices.empty() ? nullptr : &q.choices);
  s.c_q_num = result.answers.c_q_num;
  s.c_q_den = result.answers.c_q_den;
  s.a_mode = result.answers.a_mode;
  s.triggered_correction = result.answers.triggered_correction;
  s.correction_raw = result.answers.correction_raw;
  if (result.correction_outcome) {
    s.correction_digest = result.correction_outcome->digest;
  }
  s.correction_failed = result.answers.correction_failed;
  s.a_final = result.answers.a_final;
  s.total_calls = result.total_calls;
  s.wall_ms = result.wall_ms;
  s.failed = result.failed;
  s.failure = result.failure;
  s.resolution_mode = cfg.resolution_mode;
  return block;
}

}  // namespace runner_detail

inline EvalStats run_evaluation(const AugmentedManifest& manifest,
                                const std::filesystem::path& base_dir,
                                ModelBackend& backend,
                                const OrchestratorConfig& cfg,
                                const std::filesystem::path& log_path,
                                int workers = default_workers()) {
  cfg.validate();
  AnswerLogWriter writer(log_path);

  const std::size_t n = manifest.questions.size();
  std::vector<std::unique_ptr<runner_detail::QuestionBlock>> blocks(n);
  std::vector<bool> ready(n, false);
  std::mutex mu;
  std::condition_variable cv;

  std::thread producer([&] {
    parallel_for(n, workers, [&](std::size_t i) {
      auto block = std::make_unique<runner_detail::QuestionBlock>();
      try {
        *block = runner_detail::evaluate_question(manifest.questions[i],
                                                  base_dir, backend, cfg);
      } catch (...) {
        block->error = std::current_exception();
      }
      {
        std::lock_guard<std::mutex> lock(mu);
        blocks[i] = std::move(block);
        ready[i] = true;
      }
      cv.notify_all();
    });
  });

  EvalStats stats;
  std::exception_ptr abort_error;
  for (std::size_t i = 0; i < n; ++i) {
    std::unique_ptr<runner_detail::QuestionBlock> block;
    {
      std::unique_lock<std::mutex> lock(mu);
      cv.wait(lock, [&] { return ready[i]; });
      block = std::move(blocks[i]);
    }
    if (block->error) {
      if (!abort_error) abort_error = block->error;
      continue;
    }
    if (abort_error) continue;
    for (const auto& v : block->views) writer.write(v);
    writer.write(block->summary);
    ++stats.questions;
    if (block->summary.failed) ++stats.failed;
    stats.total_calls += block->summary.total_calls;
  }
  producer.join();
  if (abort_error) std::rethrow_exception(abort_error);
  return stats;
}

}  // namespace rdr
