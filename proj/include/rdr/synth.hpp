#pragma once

// Synthetic bar-chart generator: desk-scale QA items whose ground truth is
// derived from the render schema, never hand-entered. Charts are 256x256,
// white background, black axes, solid-color bars labeled A..E; values are
// round numbers so a pixel measurement can recover them exactly.

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "rdr/image.hpp"
#include "rdr/png.hpp"
#include "rdr/question.hpp"
#include "rdr/rng.hpp"

namespace rdr {

namespace synth_detail {

// 5x7 bitmap glyphs for the bar labels.
inline constexpr std::uint8_t kGlyphRows[5][7] = {
    // A
    {0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001},
    // B
    {0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110},
    // C
    {0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110},
    // D
    {0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110},
    // E
    {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111},
};

inline void draw_glyph(Image& img, int letter_index, int x, int y, int scale) {
  for (int gy = 0; gy < 7; ++gy) {
    for (int gx = 0; gx < 5; ++gx) {
      if (!(kGlyphRows[letter_index][gy] & (1 << (4 - gx)))) continue;
      for (int sy = 0; sy < scale; ++sy) {
        for (int sx = 0; sx < scale; ++sx) {
          const int px = x + gx * scale + sx;
          const int py = y + gy * scale + sy;
          if (px >= 0 && px < img.width && py >= 0 && py < img.height) {
            img.set(px, py, 0, 0, 0);
          }
        }
      }
    }
  }
}

inline void fill_rect(Image& img, int x0, int y0, int x1, int y1,
                      std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (int y = std::max(0, y0); y < std::min(img.height, y1); ++y) {
    for (int x = std::max(0, x0); x < std::min(img.width, x1); ++x) {
      img.set(x, y, r, g, b);
    }
  }
}

}  // namespace synth_detail

struct SynthStyle {
  int canvas = 256;
  int plot_left = 36;
  int plot_right = 244;
  int plot_top = 20;
  int baseline_y = 220;
  double px_per_unit = 2.0;
  std::array<std::uint8_t, 3> bar_color = {31, 119, 180};
};

// Renders a chart from its schema. Bars rest on the baseline; the axis lines
// and labels are black and live outside every bar's column band rows.
inline Image render_chart(const RenderSchema& schema) {
  namespace sd = synth_detail;
  Image img = Image::filled(schema.canvas_w, schema.canvas_h, 255, 255, 255);

  // axes: 2 px wide, just outside the plot area
  sd::fill_rect(img, schema.plot_left - 3, schema.plot_top - 4,
                schema.plot_left - 1, schema.baseline_y + 2, 0, 0, 0);
  sd::fill_rect(img, schema.plot_left - 3, schema.baseline_y,
                schema.plot_right + 3, schema.baseline_y + 2, 0, 0, 0);

  for (std::size_t i = 0; i < schema.bars.size(); ++i) {
    const auto& bar = schema.bars[i];
    const int h = static_cast<int>(bar.value * schema.px_per_unit);
    sd::fill_rect(img, bar.x0, schema.baseline_y - h, bar.x1, schema.baseline_y,
                  schema.bar_color[0], schema.bar_color[1], schema.bar_color[2]);
    const int glyph_w = 5 * 2;
    const int gx = (bar.x0 + bar.x1) / 2 - glyph_w / 2;
    sd::draw_glyph(img, static_cast<int>(i), gx, schema.baseline_y + 8, 2);
  }
  return img;
}

// Generates `count` questions with rendered charts under
// <out_dir>/images/<id>.png. Three question kinds rotate: tallest bar
// (multiple choice), value of a bar (fill in the blank, round values), and a
// taller-than comparison (yes/no). Pure function of (count, master_seed).
inline std::vector<QuestionRecord> synth_generate(
    int count, std::uint64_t master_seed,
    const std::filesystem::path& out_dir, const SynthStyle& style = {}) {
  if (count < 1) throw ConfigError("synth_generate: count must be >= 1");
  std::filesystem::create_directories(out_dir / "images");

  std::vector<QuestionRecord> records;
  records.reserve(count);

  for (int i = 0; i < count; ++i) {
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "q%04d", i);
    const std::string id = idbuf;
    // "/synth" keeps this stream disjoint from the view-plan stream.
    RandomStream rng = derive_stream(master_seed, id + "/synth", 0);

    const int n_bars = 3 + static_cast<int>(rng.next_below(3));

    // Distinct multiples of 5 in [10, 100]: adjacent values differ by at
    // least 5 units = 10 px at 2 px/unit.
    std::vector<int> pool;
    for (int v = 10; v <= 100; v += 5) pool.push_back(v);
    for (std::size_t k = pool.size(); k > 1; --k) {
      std::swap(pool[k - 1], pool[rng.next_below(k)]);
    }

    RenderSchema schema;
    schema.canvas_w = style.canvas;
    schema.canvas_h = style.canvas;
    schema.plot_left = style.plot_left;
    schema.plot_right = style.plot_right;
    schema.plot_top = style.plot_top;
    schema.baseline_y = style.baseline_y;
    schema.px_per_unit = style.px_per_unit;
    schema.bar_color = style.bar_color;

    const int slot = (style.plot_right - style.plot_left) / n_bars;
    const int bar_w = slot * 6 / 10;
    for (int b = 0; b < n_bars; ++b) {
      RenderSchema::Bar bar;
      bar.label = std::string(1, static_cast<char>('A' + b));
      bar.x0 = style.plot_left + slot * b + (slot - bar_w) / 2;
      bar.x1 = bar.x0 + bar_w;
      bar.value = pool[b];
      schema.bars.push_back(bar);
    }

    QuestionRecord q;
    q.id = id;
    q.image_path = "images/" + id + ".png";
    q.domain = known_domains()[i % known_domains().size()];
    q.render_schema = schema;

    switch (i % 3) {
      case 0: {
        q.question_text = "Which bar is the tallest?";
        q.answer_type = AnswerType::multiple_choice;
        int best = 0;
        for (int b = 1; b < n_bars; ++b) {
          if (schema.bars[b].value > schema.bars[best].value) best = b;
        }
        for (int b = 0; b < n_bars; ++b) q.choices.push_back(schema.bars[b].label);
        q.ground_truth = schema.bars[best].label;
        q.subtopic = "tallest-bar";
        break;
      }
      case 1: {
        const int b = static_cast<int>(rng.next_below(n_bars));
        q.question_text =
            "What is the value of bar " + schema.bars[b].label + "?";
        q.answer_type = AnswerType::fill_in_blank;
        q.ground_truth = std::to_string(schema.bars[b].value);
        q.subtopic = "value-reading";
        break;
      }
      default: {
        const int a = static_cast<int>(rng.next_below(n_bars));
        int b = static_cast<int>(rng.next_below(n_bars - 1));
        if (b >= a) ++b;
        q.question_text = "Is bar " + schema.bars[a].label +
                          " taller than bar " + schema.bars[b].label +
                          "? Answer yes or no.";
        q.answer_type = AnswerType::short_answer;
        q.ground_truth =
            schema.bars[a].value > schema.bars[b].value ? "yes" : "no";
        q.subtopic = "bar-comparison";
        break;
      }
    }
    q.validate();

    save_png(out_dir / q.image_path, render_chart(schema));
    records.push_back(std::move(q));
  }
  return records;
}

}  // namespace rdr
