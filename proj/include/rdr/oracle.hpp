#pragma once

// Scripted pixel-reading oracle: a deterministic stand-in for a model that
// answers synthetic bar-chart questions by measuring the rendered pixels.
// It is exact on clean renders and degrades naturally as perturbations
// corrupt its measurements, which is what makes hermetic robustness
// experiments possible.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "rdr/backend.hpp"
#include "rdr/error.hpp"
#include "rdr/image.hpp"
#include "rdr/png.hpp"
#include "rdr/question.hpp"

namespace rdr {

namespace oracle_detail {

// Color gate for "this pixel belongs to a bar".
inline constexpr double kColorTolerance = 80.0;

inline bool is_bar_color(const Image& img, int x, int y,
                         const std::array<std::uint8_t, 3>& bar) {
  const auto p = img.at(x, y);
  const double dr = static_cast<double>(p[0]) - bar[0];
  const double dg = static_cast<double>(p[1]) - bar[1];
  const double db = static_cast<double>(p[2]) - bar[2];
  return dr * dr + dg * dg + db * db <= kColorTolerance * kColorTolerance;
}

// Measured bar height in pixels: rows above the baseline where a majority of
// the bar's column band still reads as bar-colored.
inline int measure_bar_height(const Image& img, const RenderSchema& schema,
                              const RenderSchema::Bar& bar) {
  const int x0 = std::clamp(bar.x0, 0, img.width);
  const int x1 = std::clamp(bar.x1, 0, img.width);
  const int band = x1 - x0;
  if (band <= 0) return 0;
  const int y_end = std::clamp(schema.baseline_y, 0, img.height);
  int present_rows = 0;
  for (int y = 0; y < y_end; ++y) {
    int hits = 0;
    for (int x = x0; x < x1; ++x) {
      if (is_bar_color(img, x, y, schema.bar_color)) ++hits;
    }
    if (2 * hits >= band) ++present_rows;
  }
  return present_rows;
}

inline const RenderSchema::Bar& find_bar(const RenderSchema& schema,
                                         const std::string& label) {
  for (const auto& b : schema.bars) {
    if (b.label == label) return b;
  }
  throw UnsupportedQuestionError("oracle: no bar labeled '" + label + "'");
}

// The generator writes question text in fixed shapes; anything else is
// outside the oracle's measurement repertoire.
inline std::string parse_single_label(const std::string& text,
                                      const std::string& prefix) {
  const auto at = text.find(prefix);
  if (at == std::string::npos || at + prefix.size() >= text.size()) return {};
  return std::string(1, text[at + prefix.size()]);
}

}  // namespace oracle_detail

inline std::string scripted_oracle_infer(const Image& img,
                                         const QuestionRecord& q) {
  namespace od = oracle_detail;
  if (!q.render_schema) {
    throw UnsupportedQuestionError("oracle: question " + q.id +
                                   " has no render schema");
  }
  const RenderSchema& schema = *q.render_schema;
  if (schema.bars.empty() || schema.px_per_unit <= 0) {
    throw UnsupportedQuestionError("oracle: degenerate render schema on " + q.id);
  }

  const std::string& text = q.question_text;

  if (q.answer_type == AnswerType::multiple_choice &&
      text.find("tallest") != std::string::npos) {
    int best = 0;
    int best_h = -1;
    for (std::size_t i = 0; i < schema.bars.size(); ++i) {
      const int h = od::measure_bar_height(img, schema, schema.bars[i]);
      if (h > best_h) {
        best_h = h;
        best = static_cast<int>(i);
      }
    }
    return schema.bars[best].label;
  }

  if (q.answer_type == AnswerType::fill_in_blank) {
    const std::string label = od::parse_single_label(text, "value of bar ");
    if (label.empty()) {
      throw UnsupportedQuestionError("oracle: unrecognized fill question: " + text);
    }
    const auto& bar = od::find_bar(schema, label);
    const int h = od::measure_bar_height(img, schema, bar);
    const long value = std::lround(h / schema.px_per_unit);
    return std::to_string(value);
  }

  if (q.answer_type == AnswerType::short_answer) {
    const std::string a = od::parse_single_label(text, "Is bar ");
    const std::string b = od::parse_single_label(text, "taller than bar ");
    if (a.empty() || b.empty()) {
      throw UnsupportedQuestionError("oracle: unrecognized comparison question: " +
                                     text);
    }
    const int ha = od::measure_bar_height(img, schema, od::find_bar(schema, a));
    const int hb = od::measure_bar_height(img, schema, od::find_bar(schema, b));
    return ha > hb ? "yes" : "no";
  }

  throw UnsupportedQuestionError("oracle: unsupported question shape: " + text);
}

class OracleBackend : public ModelBackend {
 public:
  ModelResponse infer(const ModelRequest& req) override {
    if (!req.question) {
      throw UnsupportedQuestionError(
          "oracle backend requires the question record on the request");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const Image img = decode_png(req.png);
    ModelResponse resp;
    resp.raw_text = scripted_oracle_infer(img, *req.question);
    resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    return resp;
  }
  std::string name() const override { return "scripted-oracle"; }
};

}  // namespace rdr
