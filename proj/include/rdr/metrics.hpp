#pragma once

// Robustness metrics over answer logs: clean accuracy, the perturbation
// robustness score in both its per-view and final-answer readings, visual
// degradation consistency, faceted breakdowns, and efficiency accounting.
// Everything is a pure function of the log; percentages are exact rationals
// rounded half-up to one decimal only at render time.

#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "rdr/answer_log.hpp"
#include "rdr/error.hpp"
#include "rdr/perturb.hpp"

namespace rdr {

// Fraction in [0, 1], reduced. Rendered as a percentage.
struct Percent {
  long long num = 0;
  long long den = 1;

  static Percent of(long long num, long long den) {
    if (den <= 0) throw ValidationError("Percent: nonpositive denominator");
    const long long g = std::gcd(num, den);
    return {g ? num / g : num, g ? den / g : den};
  }

  Percent plus(const Percent& o) const {
    return of(num * o.den + o.num * den, den * o.den);
  }

  double value() const { return 100.0 * static_cast<double>(num) / den; }

  // Half-up at one decimal, computed in integers: no float round-off can
  // move a boundary case.
  std::string one_decimal() const {
    const long long t = (2000 * num + den) / (2 * den);
    return std::to_string(t / 10) + "." + std::to_string(t % 10);
  }

  bool operator==(const Percent&) const = default;
};

enum class PrsMode { per_view, amcv_final };

inline const char* to_string(PrsMode m) {
  return m == PrsMode::per_view ? "per_view" : "amcv_final";
}

// Indicator bits for one question, extracted once from its log records.
struct GradedQuestion {
  std::string question_id;
  std::vector<bool> correct;            // by position in the views list
  std::vector<bool> agrees_with_clean;  // ditto; position 0 is always true
  bool final_correct = false;
};

namespace metrics_detail {

inline std::vector<const QuestionLog*> gradable(const AnswerLog& log) {
  std::vector<const QuestionLog*> out;
  for (const auto& q : log.questions) {
    if (!q.summary.failed) out.push_back(&q);
  }
  if (out.empty()) {
    throw ValidationError("no gradable questions in the answer log");
  }
  return out;
}

inline const ViewRecord& require_view(const QuestionLog& q, int index) {
  const ViewRecord* v = q.view(index);
  if (!v) {
    throw LogFormatError("question '" + q.summary.question_id +
                         "' is missing view " + std::to_string(index));
  }
  return *v;
}

// per_view grading needs every record from view 0 to view n_views.
inline void require_all_views(const QuestionLog& q) {
  for (int i = 0; i <= q.summary.n_views; ++i) require_view(q, i);
}

}  // namespace metrics_detail

inline GradedQuestion grade_question(const QuestionLog& q) {
  metrics_detail::require_all_views(q);
  const std::string& gt = q.summary.gt_canonical;
  const std::string& clean = metrics_detail::require_view(q, 0).canonical;
  GradedQuestion g;
  g.question_id = q.summary.question_id;
  for (const auto& v : q.views) {
    g.correct.push_back(v.canonical == gt);
    g.agrees_with_clean.push_back(v.canonical == clean);
  }
  g.final_correct = q.summary.a_final == gt;
  return g;
}

// Accuracy graded on the clean view only.
inline Percent clean_accuracy(const AnswerLog& log) {
  const auto qs = metrics_detail::gradable(log);
  long long correct = 0;
  for (const auto* q : qs) {
    const auto& v0 = metrics_detail::require_view(*q, 0);
    if (v0.canonical == q->summary.gt_canonical) ++correct;
  }
  return Percent::of(correct, static_cast<long long>(qs.size()));
}

// Share of questions robustly answered: every view correct (per_view), or
// the resolved final answer correct (amcv_final).
inline Percent prs(const AnswerLog& log, PrsMode mode) {
  const auto qs = metrics_detail::gradable(log);
  long long robust = 0;
  for (const auto* q : qs) {
    if (mode == PrsMode::per_view) {
      metrics_detail::require_all_views(*q);
      bool all = true;
      for (const auto& v : q->views) {
        if (v.view_index < 0) continue;
        all = all && v.canonical == q->summary.gt_canonical;
      }
      robust += all ? 1 : 0;
    } else {
      robust += q->summary.a_final == q->summary.gt_canonical ? 1 : 0;
    }
  }
  return Percent::of(robust, static_cast<long long>(qs.size()));
}

// Mean share of views agreeing with the clean view's answer, correctness
// aside.
inline Percent vdc(const AnswerLog& log) {
  const auto qs = metrics_detail::gradable(log);
  Percent sum{0, 1};
  for (const auto* q : qs) {
    metrics_detail::require_all_views(*q);
    const std::string& clean = metrics_detail::require_view(*q, 0).canonical;
    long long agree = 0;
    long long total = 0;
    for (const auto& v : q->views) {
      if (v.view_index < 0) continue;
      ++total;
      if (v.canonical == clean) ++agree;
    }
    sum = sum.plus(Percent::of(agree, total));
  }
  return Percent::of(sum.num, sum.den * static_cast<long long>(qs.size()));
}

enum class Facet { kind, intensity };

// Faceted robustness: the quantifier runs over the views carrying the tag
// only; the untagged clean view is excluded. In amcv_final mode the
// indicator is final-answer correctness, restricted to questions that have
// at least one tagged view.
inline std::map<std::string, Percent> prs_breakdown(const AnswerLog& log,
                                                    Facet facet, PrsMode mode) {
  const auto qs = metrics_detail::gradable(log);
  std::map<std::string, long long> robust;
  std::map<std::string, long long> total;
  for (const auto* q : qs) {
    std::map<std::string, bool> all_correct;
    for (const auto& v : q->views) {
      if (v.view_index <= 0) continue;  // clean view carries no tag
      const std::string tag = facet == Facet::kind ? v.kind : v.intensity;
      if (tag.empty() || tag == "clean") {
        throw LogFormatError("question '" + q->summary.question_id +
                             "' view " + std::to_string(v.view_index) +
                             " lacks a " +
                             (facet == Facet::kind ? "kind" : "intensity") +
                             " tag");
      }
      const bool ok = v.canonical == q->summary.gt_canonical;
      auto [it, fresh] = all_correct.try_emplace(tag, ok);
      if (!fresh) it->second = it->second && ok;
    }
    for (const auto& [tag, ok] : all_correct) {
      ++total[tag];
      const bool counted =
          mode == PrsMode::per_view
              ? ok
              : q->summary.a_final == q->summary.gt_canonical;
      robust[tag] += counted ? 1 : 0;
    }
  }
  std::map<std::string, Percent> out;
  for (const auto& [tag, t] : total) {
    out[tag] = Percent::of(robust[tag], t);
  }
  return out;
}

struct EfficiencyStats {
  double mean_wall_s = 0;
  double mean_calls = 0;
};

inline EfficiencyStats efficiency(const AnswerLog& log) {
  const auto qs = metrics_detail::gradable(log);
  double wall = 0;
  double calls = 0;
  for (const auto* q : qs) {
    wall += static_cast<double>(q->summary.wall_ms) / 1000.0;
    calls += q->summary.total_calls;
  }
  return {wall / static_cast<double>(qs.size()),
          calls / static_cast<double>(qs.size())};
}

struct MetricsReport {
  Percent ca;
  Percent prs;
  Percent vdc;
  PrsMode prs_mode = PrsMode::per_view;
  std::map<std::string, Percent> by_kind;
  std::map<std::string, Percent> by_intensity;
  EfficiencyStats eff;
  int m = 0;                 // gradable questions
  int failed_questions = 0;  // excluded from m, reported separately

  nlohmann::json to_json() const {
    const auto pct = [](const Percent& p) {
      return nlohmann::json{{"value", p.value()},
                            {"rendered", p.one_decimal()},
                            {"num", p.num},
                            {"den", p.den}};
    };
    nlohmann::json jk, ji;
    for (const auto& [k, v] : by_kind) jk[k] = pct(v);
    for (const auto& [k, v] : by_intensity) ji[k] = pct(v);
    return {{"ca", pct(ca)},
            {"prs", pct(prs)},
            {"vdc", pct(vdc)},
            {"prs_mode", to_string(prs_mode)},
            {"prs_by_kind", jk},
            {"prs_by_intensity", ji},
            {"efficiency",
             {{"mean_wall_s_per_question", eff.mean_wall_s},
              {"mean_calls_per_question", eff.mean_calls}}},
            {"questions", m},
            {"failed_questions", failed_questions}};
  }
};

inline MetricsReport compute_report(const AnswerLog& log, PrsMode mode) {
  MetricsReport r;
  r.ca = clean_accuracy(log);
  r.prs = prs(log, mode);
  r.vdc = vdc(log);
  r.prs_mode = mode;
  // Single-view logs have no tagged views to facet over.
  bool any_tagged = false;
  for (const auto& q : log.questions) {
    if (!q.summary.failed && q.summary.n_views > 0) any_tagged = true;
  }
  if (any_tagged) {
    r.by_kind = prs_breakdown(log, Facet::kind, mode);
    r.by_intensity = prs_breakdown(log, Facet::intensity, mode);
  }
  r.eff = efficiency(log);
  for (const auto& q : log.questions) {
    if (q.summary.failed) {
      ++r.failed_questions;
    } else {
      ++r.m;
    }
  }
  return r;
}

}  // namespace rdr
