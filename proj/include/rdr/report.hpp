#pragma once

// Report emission: Markdown tables in the presentation shapes of the usual
// LVLM robustness write-ups (overall comparison, resolution-mode ablation,
// per-type and per-intensity breakdowns, efficiency), plus a flat CSV and
// per-label metrics JSON. Everything is written to files so CI can compare
// bytes.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rdr/answer_log.hpp"
#include "rdr/metrics.hpp"

namespace rdr {

// Half-up at one decimal for values that arrive as doubles (fixture rows).
inline std::string format_1dp(double v) {
  const long long t = std::llround(v * 10.0);
  std::string out = std::to_string(t / 10) + "." + std::to_string(std::llabs(t % 10));
  return out;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string render_markdown_table(
    const std::vector<std::string>& header,
    const std::vector<std::vector<std::string>>& rows) {
  std::string out = "|";
  for (const auto& h : header) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) out += " --- |";
  out += "\n";
  for (const auto& row : rows) {
    out += "|";
    for (const auto& cell : row) out += " " + cell + " |";
    out += "\n";
  }
  return out;
}

// One line in the overall/ablation tables. Cells are pre-rendered so stored
// literature values and computed rationals format identically.
struct ScoreRow {
  std::string label;
  std::string ca;
  std::string prs;
  std::string vdc;

  static ScoreRow from_report(const std::string& label, const MetricsReport& r) {
    return {label, r.ca.one_decimal(), r.prs.one_decimal(), r.vdc.one_decimal()};
  }
  static ScoreRow from_values(const std::string& label, double ca, double prs,
                              double vdc) {
    return {label, format_1dp(ca), format_1dp(prs), format_1dp(vdc)};
  }
};

inline std::string render_score_table(const std::string& label_header,
                                      const std::vector<ScoreRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) cells.push_back({r.label, r.ca, r.prs, r.vdc});
  return render_markdown_table({label_header, "CA", "PRS", "VDC"}, cells);
}

struct LabeledReport {
  std::string label;
  MetricsReport report;
};

inline std::string render_breakdown_table(
    const std::vector<LabeledReport>& reports, Facet facet) {
  std::vector<std::string> header;
  header.push_back(facet == Facet::kind ? "Perturbation Type"
                                        : "Intensity Level");
  for (const auto& r : reports) header.push_back(r.label + " PRS");

  std::vector<std::string> keys;
  if (facet == Facet::kind) {
    for (auto k : kAllKinds) keys.push_back(to_string(k));
  } else {
    for (auto l : kAllLevels) keys.push_back(to_string(l));
  }

  std::vector<std::vector<std::string>> rows;
  for (const auto& key : keys) {
    bool any = false;
    std::vector<std::string> row{key};
    for (const auto& r : reports) {
      const auto& map =
          facet == Facet::kind ? r.report.by_kind : r.report.by_intensity;
      const auto it = map.find(key);
      if (it != map.end()) {
        row.push_back(it->second.one_decimal());
        any = true;
      } else {
        row.push_back("-");
      }
    }
    if (any) rows.push_back(std::move(row));
  }
  std::vector<std::string> avg{"Average PRS"};
  for (const auto& r : reports) avg.push_back(r.report.prs.one_decimal());
  rows.push_back(std::move(avg));
  return render_markdown_table(header, rows);
}

inline std::string render_efficiency_table(
    const std::vector<LabeledReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    rows.push_back({r.label, format_fixed(r.report.eff.mean_wall_s, 3),
                    format_fixed(r.report.eff.mean_calls, 2)});
  }
  return render_markdown_table(
      {"Configuration", "Time per Question (s)", "API Calls per Question"},
      rows);
}

// Rebuilds a log's final answers under a different resolution mode, straight
// from the raw per-view records. This is how the ablation table gets its
// single_view and majority_vote rows out of one full run.
inline AnswerLog reresolve_log(const AnswerLog& log, ResolutionMode mode) {
  AnswerLog out = log;
  for (auto& q : out.questions) {
    if (q.summary.failed) continue;
    auto& s = q.summary;
    s.resolution_mode = mode;
    switch (mode) {
      case ResolutionMode::single_view: {
        const ViewRecord* v0 = q.view(0);
        if (!v0) {
          throw LogFormatError("question '" + s.question_id +
                               "' has no clean view to re-resolve from");
        }
        s.a_final = v0->canonical;
        s.total_calls = 1;
        s.triggered_correction = false;
        s.correction_raw.reset();
        s.correction_failed = false;
        break;
      }
      case ResolutionMode::majority_vote: {
        s.a_final = s.a_mode;
        s.total_calls = static_cast<int>(q.views.size());
        s.triggered_correction = false;
        s.correction_raw.reset();
        s.correction_failed = false;
        break;
      }
      case ResolutionMode::full_amcv:
        break;  // the log already is the full run
    }
  }
  return out;
}

inline std::string render_csv(const std::vector<LabeledReport>& reports) {
  std::string out =
      "label,questions,failed,ca,prs,prs_mode,vdc,mean_wall_s,mean_calls";
  for (auto k : kAllKinds) out += std::string(",prs_") + to_string(k);
  for (auto l : kAllLevels) out += std::string(",prs_") + to_string(l);
  out += "\n";
  for (const auto& r : reports) {
    out += r.label;
    out += "," + std::to_string(r.report.m);
    out += "," + std::to_string(r.report.failed_questions);
    out += "," + r.report.ca.one_decimal();
    out += "," + r.report.prs.one_decimal();
    out += std::string(",") + to_string(r.report.prs_mode);
    out += "," + r.report.vdc.one_decimal();
    out += "," + format_fixed(r.report.eff.mean_wall_s, 3);
    out += "," + format_fixed(r.report.eff.mean_calls, 2);
    const auto cell = [](const std::map<std::string, Percent>& m,
                         const std::string& key) {
      const auto it = m.find(key);
      return it == m.end() ? std::string() : it->second.one_decimal();
    };
    for (auto k : kAllKinds) out += "," + cell(r.report.by_kind, to_string(k));
    for (auto l : kAllLevels) {
      out += "," + cell(r.report.by_intensity, to_string(l));
    }
    out += "\n";
  }
  return out;
}

struct ReportBundle {
  std::vector<LabeledReport> reports;       // one per input log
  std::vector<ScoreRow> reference_rows;     // stored literature values
  std::vector<LabeledReport> ablation;      // three resolution variants
};

inline std::string render_report_markdown(const ReportBundle& bundle) {
  std::string md = "# Robustness Evaluation Report\n\n";

  md += "## Overall\n\n";
  std::vector<ScoreRow> rows;
  for (const auto& r : bundle.reports) {
    rows.push_back(ScoreRow::from_report(r.label, r.report));
  }
  rows.insert(rows.end(), bundle.reference_rows.begin(),
              bundle.reference_rows.end());
  md += render_score_table("Model", rows);

  if (!bundle.ablation.empty()) {
    md += "\n## Resolution ablation\n\n";
    std::vector<ScoreRow> ab;
    for (const auto& r : bundle.ablation) {
      ab.push_back(ScoreRow::from_report(r.label, r.report));
    }
    md += render_score_table("Variant", ab);
  }

  const bool any_breakdown = [&] {
    for (const auto& r : bundle.reports) {
      if (!r.report.by_kind.empty()) return true;
    }
    return false;
  }();
  if (any_breakdown) {
    md += "\n## PRS by perturbation type\n\n";
    md += render_breakdown_table(bundle.reports, Facet::kind);
    md += "\n## PRS by perturbation intensity\n\n";
    md += render_breakdown_table(bundle.reports, Facet::intensity);
  }

  md += "\n## Efficiency\n\n";
  std::vector<LabeledReport> eff = bundle.reports;
  eff.insert(eff.end(), bundle.ablation.begin(), bundle.ablation.end());
  md += render_efficiency_table(eff);
  return md;
}

inline void write_report_files(const ReportBundle& bundle,
                               const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream md(out_dir / "report.md", std::ios::trunc);
    if (!md) throw RdrError("cannot write report.md");
    md << render_report_markdown(bundle);
  }
  {
    std::ofstream csv(out_dir / "report.csv", std::ios::trunc);
    if (!csv) throw RdrError("cannot write report.csv");
    std::vector<LabeledReport> all = bundle.reports;
    all.insert(all.end(), bundle.ablation.begin(), bundle.ablation.end());
    csv << render_csv(all);
  }
  for (const auto& r : bundle.reports) {
    std::ofstream js(out_dir / ("metrics_" + r.label + ".json"),
                     std::ios::trunc);
    if (!js) throw RdrError("cannot write metrics json");
    js << r.report.to_json().dump(2) << '\n';
  }
}

}  // namespace rdr
