#pragma once

// Answer log: JSON-lines, one record per (question, view) plus one summary
// record per question. The log is the sole input to the metrics module —
// everything needed to regrade a run offline is in here.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rdr/amcv.hpp"
#include "rdr/error.hpp"
#include "rdr/question.hpp"

namespace rdr {

struct ViewRecord {
  std::string question_id;
  int view_index = 0;
  std::string kind = "clean";  // perturbation kind; "clean" for view 0
  std::string intensity;       // empty for the clean view
  std::string digest;
  std::string raw;
  std::string canonical;
  long long latency_ms = 0;
  bool from_cache = false;

  nlohmann::json to_json() const {
    return {{"type", "view"},
            {"question_id", question_id},
            {"view_index", view_index},
            {"kind", kind},
            {"intensity", intensity},
            {"digest", digest},
            {"raw", raw},
            {"canonical", canonical},
            {"latency_ms", latency_ms},
            {"from_cache", from_cache}};
  }

  static ViewRecord from_json(const nlohmann::json& j) {
    ViewRecord r;
    r.question_id = j.at("question_id");
    r.view_index = j.at("view_index");
    r.kind = j.at("kind");
    r.intensity = j.at("intensity");
    r.digest = j.at("digest");
    r.raw = j.at("raw");
    r.canonical = j.at("canonical");
    r.latency_ms = j.at("latency_ms");
    r.from_cache = j.at("from_cache");
    return r;
  }
};

struct SummaryRecord {
  std::string question_id;
  int n_views = 0;  // perturbed views evaluated (0 in single_view runs)
  AnswerType answer_type = AnswerType::multiple_choice;
  std::string ground_truth;
  std::string gt_canonical;
  long long c_q_num = 0;
  long long c_q_den = 1;
  std::string a_mode;
  bool triggered_correction = false;
  std::optional<std::string> correction_raw;
  std::string correction_digest;
  bool correction_failed = false;
  std::string a_final;
  int total_calls = 0;
  long long wall_ms = 0;
  bool failed = false;
  std::string failure;
  ResolutionMode resolution_mode = ResolutionMode::full_amcv;

  double c_q() const { return static_cast<double>(c_q_num) / c_q_den; }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"type", "summary"},
                        {"question_id", question_id},
                        {"n_views", n_views},
                        {"answer_type", to_string(answer_type)},
                        {"ground_truth", ground_truth},
                        {"gt_canonical", gt_canonical},
                        {"c_q_num", c_q_num},
                        {"c_q_den", c_q_den},
                        {"a_mode", a_mode},
                        {"triggered_correction", triggered_correction},
                        {"correction_failed", correction_failed},
                        {"a_final", a_final},
                        {"total_calls", total_calls},
                        {"wall_ms", wall_ms},
                        {"failed", failed},
                        {"failure", failure},
                        {"resolution_mode", to_string(resolution_mode)}};
    if (correction_raw) {
      j["correction_raw"] = *correction_raw;
      j["correction_digest"] = correction_digest;
    }
    return j;
  }

  static SummaryRecord from_json(const nlohmann::json& j) {
    SummaryRecord r;
    r.question_id = j.at("question_id");
    r.n_views = j.at("n_views");
    r.answer_type = answer_type_from_string(j.at("answer_type"));
    r.ground_truth = j.at("ground_truth");
    r.gt_canonical = j.at("gt_canonical");
    r.c_q_num = j.at("c_q_num");
    r.c_q_den = j.at("c_q_den");
    r.a_mode = j.at("a_mode");
    r.triggered_correction = j.at("triggered_correction");
    if (j.contains("correction_raw")) {
      r.correction_raw = j.at("correction_raw").get<std::string>();
      r.correction_digest = j.value("correction_digest", std::string());
    }
    r.correction_failed = j.at("correction_failed");
    r.a_final = j.at("a_final");
    r.total_calls = j.at("total_calls");
    r.wall_ms = j.at("wall_ms");
    r.failed = j.at("failed");
    r.failure = j.value("failure", std::string());
    r.resolution_mode = resolution_mode_from_string(j.at("resolution_mode"));
    return r;
  }
};

class AnswerLogWriter {
 public:
  explicit AnswerLogWriter(const std::filesystem::path& path)
      : out_(path, std::ios::trunc) {
    if (!out_) throw RdrError("cannot open answer log for writing: " + path.string());
  }

  void write(const ViewRecord& r) { write_line(r.to_json()); }
  void write(const SummaryRecord& r) { write_line(r.to_json()); }

 private:
  void write_line(const nlohmann::json& j) {
    std::lock_guard<std::mutex> lock(mu_);
    out_ << j.dump() << '\n';
    out_.flush();
  }

  std::ofstream out_;
  std::mutex mu_;
};

struct QuestionLog {
  SummaryRecord summary;
  std::vector<ViewRecord> views;  // sorted by view_index

  const ViewRecord* view(int index) const {
    for (const auto& v : views) {
      if (v.view_index == index) return &v;
    }
    return nullptr;
  }
};

struct AnswerLog {
  std::vector<QuestionLog> questions;  // in summary-record order

  static AnswerLog parse(std::istream& in, const std::string& name) {
    std::map<std::string, std::vector<ViewRecord>> views;
    std::vector<SummaryRecord> summaries;
    std::map<std::string, int> summary_count;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
        const std::string type = j.at("type");
        if (type == "view") {
          views[j.at("question_id")].push_back(ViewRecord::from_json(j));
        } else if (type == "summary") {
          SummaryRecord s = SummaryRecord::from_json(j);
          ++summary_count[s.question_id];
          summaries.push_back(std::move(s));
        } else {
          throw LogFormatError(name + ":" + std::to_string(line_no) +
                               ": unknown record type '" + type + "'");
        }
      } catch (const nlohmann::json::exception& e) {
        throw LogFormatError(name + ":" + std::to_string(line_no) + ": " +
                             e.what());
      }
    }
    AnswerLog log;
    for (auto& s : summaries) {
      if (summary_count[s.question_id] > 1) {
        throw LogFormatError(name + ": duplicate summary for question '" +
                             s.question_id + "'");
      }
      QuestionLog q;
      q.views = std::move(views[s.question_id]);
      std::sort(q.views.begin(), q.views.end(),
                [](const ViewRecord& a, const ViewRecord& b) {
                  return a.view_index < b.view_index;
                });
      for (std::size_t i = 1; i < q.views.size(); ++i) {
        if (q.views[i].view_index == q.views[i - 1].view_index) {
          throw LogFormatError(name + ": duplicate view " +
                               std::to_string(q.views[i].view_index) +
                               " for question '" + s.question_id + "'");
        }
      }
      views.erase(s.question_id);
      q.summary = std::move(s);
      log.questions.push_back(std::move(q));
    }
    if (!views.empty()) {
      throw LogFormatError(name + ": view records without a summary for '" +
                           views.begin()->first + "'");
    }
    return log;
  }

  static AnswerLog load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw RdrError("cannot open answer log: " + path.string());
    return parse(in, path.string());
  }
};

}  // namespace rdr
