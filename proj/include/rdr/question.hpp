#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rdr/error.hpp"

namespace rdr {

enum class AnswerType { multiple_choice, fill_in_blank, short_answer };

inline const char* to_string(AnswerType t) {
  switch (t) {
    case AnswerType::multiple_choice: return "multiple_choice";
    case AnswerType::fill_in_blank: return "fill_in_blank";
    case AnswerType::short_answer: return "short_answer";
  }
  return "?";
}

inline AnswerType answer_type_from_string(const std::string& s) {
  if (s == "multiple_choice") return AnswerType::multiple_choice;
  if (s == "fill_in_blank") return AnswerType::fill_in_blank;
  if (s == "short_answer") return AnswerType::short_answer;
  throw ValidationError("unknown answer_type: " + s);
}

inline const std::vector<std::string>& known_domains() {
  static const std::vector<std::string> d = {"Physics", "Chemistry", "Biology",
                                             "Geography"};
  return d;
}

// Layout constants of a synthetically rendered bar chart. Present only on
// generated questions; it is what lets the scripted oracle invert the render.
struct RenderSchema {
  int canvas_w = 0;
  int canvas_h = 0;
  int plot_left = 0;
  int plot_right = 0;
  int plot_top = 0;
  int baseline_y = 0;
  double px_per_unit = 0;
  std::array<std::uint8_t, 3> bar_color = {0, 0, 0};

  struct Bar {
    std::string label;
    int x0 = 0;  // inclusive
    int x1 = 0;  // exclusive
    int value = 0;
  };
  std::vector<Bar> bars;

  nlohmann::json to_json() const {
    nlohmann::json jb = nlohmann::json::array();
    for (const auto& b : bars) {
      jb.push_back({{"label", b.label}, {"x0", b.x0}, {"x1", b.x1},
                    {"value", b.value}});
    }
    return {{"canvas_w", canvas_w},   {"canvas_h", canvas_h},
            {"plot_left", plot_left}, {"plot_right", plot_right},
            {"plot_top", plot_top},   {"baseline_y", baseline_y},
            {"px_per_unit", px_per_unit},
            {"bar_color", {bar_color[0], bar_color[1], bar_color[2]}},
            {"bars", jb}};
  }

  static RenderSchema from_json(const nlohmann::json& j) {
    RenderSchema s;
    s.canvas_w = j.at("canvas_w");
    s.canvas_h = j.at("canvas_h");
    s.plot_left = j.at("plot_left");
    s.plot_right = j.at("plot_right");
    s.plot_top = j.at("plot_top");
    s.baseline_y = j.at("baseline_y");
    s.px_per_unit = j.at("px_per_unit");
    const auto& c = j.at("bar_color");
    s.bar_color = {c.at(0).get<std::uint8_t>(), c.at(1).get<std::uint8_t>(),
                   c.at(2).get<std::uint8_t>()};
    for (const auto& jb : j.at("bars")) {
      s.bars.push_back({jb.at("label").get<std::string>(), jb.at("x0"),
                        jb.at("x1"), jb.at("value")});
    }
    return s;
  }
};

// One diagram QA item.
struct QuestionRecord {
  std::string id;
  std::string image_path;  // relative to the manifest's directory
  std::string question_text;
  AnswerType answer_type = AnswerType::multiple_choice;
  std::vector<std::string> choices;  // multiple_choice only
  std::string ground_truth;
  std::string domain;
  std::string subtopic;
  std::optional<RenderSchema> render_schema;

  void validate() const {
    if (id.empty()) throw ValidationError("question: empty id");
    if (image_path.empty()) throw ValidationError("question: empty image_path");
    if (question_text.empty()) {
      throw ValidationError("question: empty question_text");
    }
    if (ground_truth.empty()) {
      throw ValidationError("question: empty ground_truth");
    }
    bool domain_ok = false;
    for (const auto& d : known_domains()) domain_ok |= (d == domain);
    if (!domain_ok) throw ValidationError("question: unknown domain '" + domain + "'");
    if (answer_type == AnswerType::multiple_choice) {
      if (choices.size() < 2 || choices.size() > 5) {
        throw ValidationError("question: multiple_choice needs 2..5 choices");
      }
      if (ground_truth.size() != 1 || ground_truth[0] < 'A' ||
          ground_truth[0] >= static_cast<char>('A' + choices.size())) {
        throw ValidationError(
            "question: multiple_choice ground_truth must be a letter within "
            "A.." +
            std::string(1, static_cast<char>('A' + choices.size() - 1)));
      }
    } else if (!choices.empty()) {
      throw ValidationError("question: choices only allowed for multiple_choice");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"id", id},
                        {"image_path", image_path},
                        {"question_text", question_text},
                        {"answer_type", to_string(answer_type)},
                        {"ground_truth", ground_truth},
                        {"domain", domain},
                        {"subtopic", subtopic}};
    if (answer_type == AnswerType::multiple_choice) j["choices"] = choices;
    if (render_schema) j["render_schema"] = render_schema->to_json();
    return j;
  }

  static QuestionRecord from_json(const nlohmann::json& j) {
    QuestionRecord q;
    q.id = j.at("id").get<std::string>();
    q.image_path = j.at("image_path").get<std::string>();
    q.question_text = j.at("question_text").get<std::string>();
    q.answer_type = answer_type_from_string(j.at("answer_type"));
    if (j.contains("choices")) {
      q.choices = j.at("choices").get<std::vector<std::string>>();
    }
    q.ground_truth = j.at("ground_truth").get<std::string>();
    q.domain = j.at("domain").get<std::string>();
    q.subtopic = j.value("subtopic", std::string());
    if (j.contains("render_schema") && !j.at("render_schema").is_null()) {
      q.render_schema = RenderSchema::from_json(j.at("render_schema"));
    }
    q.validate();
    return q;
  }
};

}  // namespace rdr
