#pragma once

// Adaptive multi-view orchestration: fan inference out over the clean view
// and every perturbed view, score answer agreement as an exact rational,
// and resolve the final answer by mode or by a single self-correction call
// against the clean diagram.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rdr/backend.hpp"
#include "rdr/error.hpp"
#include "rdr/question.hpp"

namespace rdr {

enum class ResolutionMode { single_view, majority_vote, full_amcv };

inline const char* to_string(ResolutionMode m) {
  switch (m) {
    case ResolutionMode::single_view: return "single_view";
    case ResolutionMode::majority_vote: return "majority_vote";
    case ResolutionMode::full_amcv: return "full_amcv";
  }
  return "?";
}

inline ResolutionMode resolution_mode_from_string(const std::string& s) {
  if (s == "single_view") return ResolutionMode::single_view;
  if (s == "majority_vote") return ResolutionMode::majority_vote;
  if (s == "full_amcv") return ResolutionMode::full_amcv;
  throw ValidationError("unknown resolution mode: " + s);
}

struct OrchestratorConfig {
  double tau = 0.6;
  int n_views = 10;
  ResolutionMode resolution_mode = ResolutionMode::full_amcv;

  void validate() const {
    if (tau < 0 || tau > 1) throw ConfigError("tau must be in [0,1]");
  }
};

// Canonical value for answers no extractor can make sense of. Distinct from
// every real answer and never equal to ground truth.
inline constexpr const char* kUnparseable = "UNPARSEABLE";

namespace answer_detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string collapse_ws(const std::string& s) {
  std::string out;
  bool in_ws = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_ws = true;
      continue;
    }
    if (in_ws && !out.empty()) out.push_back(' ');
    in_ws = false;
    out.push_back(c);
  }
  return out;
}

inline void strip_terminal_punct(std::string& s) {
  while (!s.empty()) {
    const char c = s.back();
    if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' ||
        std::isspace(static_cast<unsigned char>(c))) {
      s.pop_back();
    } else {
      break;
    }
  }
}

inline void strip_leading_articles(std::string& s) {
  for (;;) {
    if (s.rfind("a ", 0) == 0) {
      s.erase(0, 2);
    } else if (s.rfind("an ", 0) == 0) {
      s.erase(0, 3);
    } else if (s.rfind("the ", 0) == 0) {
      s.erase(0, 4);
    } else {
      break;
    }
  }
}

// Canonicalize a leading numeric token: drop thousands separators and the
// sign of zero, trim leading integer zeros and trailing fraction zeros
// ("1,250.0" -> "1250", "5.0" -> "5", "-0.50" -> "-0.5").
inline void canonicalize_leading_number(std::string& s) {
  std::size_t i = 0;
  bool neg = false;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
    neg = s[i] == '-';
    ++i;
  }
  const std::size_t digits_start = i;
  std::string int_part, frac_part;
  while (i < s.size() &&
         (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == ',')) {
    if (s[i] != ',') int_part.push_back(s[i]);
    ++i;
  }
  if (int_part.empty()) return;  // no numeric token at the front
  if (i + 1 < s.size() && s[i] == '.' &&
      std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      frac_part.push_back(s[i]);
      ++i;
    }
  }
  (void)digits_start;

  while (int_part.size() > 1 && int_part.front() == '0') int_part.erase(0, 1);
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();

  std::string canon;
  const bool is_zero = frac_part.empty() &&
                       int_part.find_first_not_of('0') == std::string::npos;
  if (neg && !is_zero) canon.push_back('-');
  canon += int_part;
  if (!frac_part.empty()) {
    canon.push_back('.');
    canon += frac_part;
  }
  s = canon + s.substr(i);
}

// Text after the last "answer"-style marker ("Answer: B", "the answer is X",
// "FINAL ANSWER: yes"). Empty when no marker is present.
inline std::string after_answer_marker(const std::string& raw) {
  const std::string low = lower(raw);
  const std::string needle = "answer";
  std::size_t at = std::string::npos;
  std::size_t from = 0;
  for (;;) {
    const std::size_t hit = low.find(needle, from);
    if (hit == std::string::npos) break;
    const bool left_ok =
        hit == 0 || !std::isalpha(static_cast<unsigned char>(low[hit - 1]));
    const std::size_t end = hit + needle.size();
    const bool right_ok =
        end >= low.size() || !std::isalpha(static_cast<unsigned char>(low[end]));
    if (left_ok && right_ok) at = end;
    from = hit + 1;
  }
  if (at == std::string::npos) return {};
  std::size_t i = at;
  while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
  if (low.compare(i, 3, "is ") == 0) i += 3;
  while (i < raw.size() &&
         (raw[i] == ':' || raw[i] == '-' || raw[i] == '=' ||
          std::isspace(static_cast<unsigned char>(raw[i])))) {
    ++i;
  }
  return trim(raw.substr(i));
}

// "B", "(B)", "B.", "**B**", "B) because ..." -> option index, or -1.
inline int extract_option_letter(const std::string& text, int n_choices) {
  std::string s = trim(text);
  while (!s.empty() && (s.front() == '*' || s.front() == '`' ||
                        s.front() == '"' || s.front() == '\'')) {
    s.erase(0, 1);
  }
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '(' || s[i] == '[' || s[i] == '{')) ++i;
  if (i >= s.size() || !std::isalpha(static_cast<unsigned char>(s[i]))) return -1;
  const char letter =
      static_cast<char>(std::toupper(static_cast<unsigned char>(s[i])));
  ++i;
  while (i < s.size() && (s[i] == ')' || s[i] == ']' || s[i] == '}' ||
                          s[i] == '.' || s[i] == ':' || s[i] == ',' ||
                          s[i] == '*' || s[i] == '`' || s[i] == '"' ||
                          s[i] == '\'')) {
    ++i;
  }
  if (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) return -1;
  const int idx = letter - 'A';
  if (idx < 0 || idx >= n_choices) return -1;
  return idx;
}

inline std::string normalize_text(const std::string& raw) {
  std::string s = collapse_ws(trim(lower(raw)));
  strip_terminal_punct(s);
  strip_leading_articles(s);
  canonicalize_leading_number(s);
  return s;
}

}  // namespace answer_detail

// Canonical form of a raw model answer. Multiple-choice answers reduce to
// the option letter; free-text answers go through the normalization chain
// (case, whitespace, terminal punctuation, leading articles, leading numeric
// token). Unextractable multiple-choice answers become kUnparseable.
inline std::string normalize_answer(
    const std::string& raw, AnswerType kind,
    const std::vector<std::string>* choices = nullptr) {
  namespace ad = answer_detail;

  if (kind == AnswerType::multiple_choice) {
    const int n = choices && !choices->empty()
                      ? static_cast<int>(choices->size())
                      : 5;
    const std::string tail = ad::after_answer_marker(raw);
    if (!tail.empty()) {
      const int idx = ad::extract_option_letter(tail, n);
      if (idx >= 0) return std::string(1, static_cast<char>('A' + idx));
    }
    const int idx = ad::extract_option_letter(raw, n);
    if (idx >= 0) return std::string(1, static_cast<char>('A' + idx));
    if (choices) {
      // Verbatim choice text, if it maps to exactly one option.
      for (const std::string& cand :
           {tail.empty() ? raw : tail, raw}) {
        const std::string norm = ad::normalize_text(cand);
        if (norm.empty()) continue;
        int match = -1;
        bool unique = true;
        for (std::size_t k = 0; k < choices->size(); ++k) {
          if (ad::normalize_text((*choices)[k]) == norm) {
            if (match >= 0) unique = false;
            match = static_cast<int>(k);
          }
        }
        if (match >= 0 && unique) {
          return std::string(1, static_cast<char>('A' + match));
        }
      }
    }
    return kUnparseable;
  }

  const std::string tail = ad::after_answer_marker(raw);
  const std::string canon = ad::normalize_text(tail.empty() ? raw : tail);
  return canon.empty() ? ad::normalize_text(raw) : canon;
}

// Eq. 3: modal share of the answer multiset, kept as an exact rational.
struct ConsistencyScore {
  long long num = 0;
  long long den = 1;
  std::string a_mode;

  double value() const { return static_cast<double>(num) / den; }
};

// Tie-break: among equally frequent answers, the one first held by the
// lowest view index wins (the clean view, when it is part of a tie).
inline ConsistencyScore consistency_score(
    const std::vector<std::string>& canon_answers) {
  if (canon_answers.empty()) {
    throw ValidationError("consistency_score: empty answer list");
  }
  std::map<std::string, long long> counts;
  std::map<std::string, std::size_t> first_seen;
  for (std::size_t i = 0; i < canon_answers.size(); ++i) {
    const auto& a = canon_answers[i];
    if (++counts[a] == 1) first_seen[a] = i;
  }
  std::string best;
  long long best_count = -1;
  for (const auto& [value, count] : counts) {
    if (count > best_count ||
        (count == best_count && first_seen[value] < first_seen[best])) {
      best = value;
      best_count = count;
    }
  }
  return {best_count, static_cast<long long>(canon_answers.size()), best};
}

// Per-question outcome of the multi-view pass.
struct AnswerSet {
  std::string question_id;
  struct Entry {
    std::string raw;
    std::string canonical;
  };
  std::vector<Entry> answers;  // ordered by view index; [0] is the clean view
  long long c_q_num = 0;
  long long c_q_den = 1;
  std::string a_mode;
  bool triggered_correction = false;
  std::string a_final;
  int extra_calls = 0;
  std::optional<std::string> correction_raw;
  bool correction_failed = false;  // transport failure on the extra call

  double c_q() const { return static_cast<double>(c_q_num) / c_q_den; }
};

// --- prompts ----------------------------------------------------------------

inline std::string render_choices_block(const QuestionRecord& q) {
  std::string out;
  for (std::size_t i = 0; i < q.choices.size(); ++i) {
    out += static_cast<char>('A' + i);
    out += ". ";
    out += q.choices[i];
    out += '\n';
  }
  return out;
}

// Default first-pass prompt. Config-visible: the CLI records it in run
// provenance, and it is the string hashed into every cache key.
inline std::string render_default_prompt(const QuestionRecord& q) {
  std::string out = "You are given a scientific diagram and a question about it.\n";
  out += "Question: " + q.question_text + "\n";
  switch (q.answer_type) {
    case AnswerType::multiple_choice:
      out += "Options:\n" + render_choices_block(q);
      out += "Reply with the letter of the correct option only.";
      break;
    case AnswerType::fill_in_blank:
      out += "Reply with the exact value or word that fills the blank, and "
             "nothing else.";
      break;
    case AnswerType::short_answer:
      out += "Reply with a single word or short phrase only.";
      break;
  }
  return out;
}

// Self-correction prompt: the question, every per-view answer with its
// provenance, and the instruction to reconcile them, closed by a
// machine-readable final-answer marker.
inline std::string build_self_correction_prompt(const QuestionRecord& q,
                                                const AnswerSet& answers) {
  bool divergent = false;
  for (const auto& e : answers.answers) {
    if (e.canonical != answers.answers.front().canonical) divergent = true;
  }
  if (!divergent) {
    throw ValidationError(
        "self-correction prompt requested for a unanimous answer set");
  }
  std::string out =
      "You have provided different answers for the question below based on "
      "slightly varied visual presentations of the diagram.\n";
  out += "Question: " + q.question_text + "\n";
  if (q.answer_type == AnswerType::multiple_choice) {
    out += "Options:\n" + render_choices_block(q);
  }
  out += "Your responses were:\n";
  for (std::size_t i = 0; i < answers.answers.size(); ++i) {
    out += "- view " + std::to_string(i);
    if (i == 0) out += " (original, unperturbed diagram)";
    out += ": " + answers.answers[i].raw + "\n";
  }
  out +=
      "Please re-examine the diagram and your previous answers, identify the "
      "most consistent and likely correct answer among them, and explain "
      "your reasoning for the final choice.\n";
  out += "End your reply with a line of the form:\nFINAL ANSWER: <answer>";
  return out;
}

// --- orchestration ----------------------------------------------------------

// One view handed to the orchestrator: tag metadata plus encoded image.
struct ViewInput {
  int view_index = 0;
  std::string kind = "clean";  // "clean" for view 0, else the perturbation
  std::string intensity;       // empty for the clean view
  std::vector<std::uint8_t> png;
};

struct ViewOutcome {
  ModelResponse response;
  std::string digest;
};

struct MultiViewResult {
  AnswerSet answers;
  std::vector<ViewOutcome> outcomes;  // parallel to the views actually queried
  std::optional<ViewOutcome> correction_outcome;
  int total_calls = 0;
  long long wall_ms = 0;
  bool failed = false;
  std::string failure;
};

inline ModelRequest make_view_request(const QuestionRecord& q,
                                      const ViewInput& view) {
  ModelRequest req;
  req.png = view.png;
  req.prompt = render_default_prompt(q);
  req.prompt_template_id = "default";
  req.answer_type = q.answer_type;
  req.view_index = view.view_index;
  req.question = q;
  return req;
}

// Eq. 4 resolution. Fills a_final, triggered_correction, and extra_calls on
// the answer set; the correction call goes against the clean view only.
inline std::optional<ViewOutcome> resolve_final(const QuestionRecord& q,
                                                AnswerSet& set,
                                                ModelBackend& backend,
                                                const OrchestratorConfig& cfg,
                                                const ViewInput& clean_view) {
  switch (cfg.resolution_mode) {
    case ResolutionMode::single_view:
      set.a_final = set.answers.front().canonical;
      return std::nullopt;
    case ResolutionMode::majority_vote:
      set.a_final = set.a_mode;
      return std::nullopt;
    case ResolutionMode::full_amcv:
      break;
  }
  // c_q >= tau keeps the mode; only a sub-threshold score pays for the
  // correction call.
  if (static_cast<double>(set.c_q_num) >= cfg.tau * set.c_q_den) {
    set.a_final = set.a_mode;
    return std::nullopt;
  }
  set.triggered_correction = true;
  set.extra_calls = 1;

  ModelRequest req;
  req.png = clean_view.png;
  req.prompt = build_self_correction_prompt(q, set);
  req.prompt_template_id = "self_correction";
  req.answer_type = q.answer_type;
  req.view_index = -1;
  req.question = q;

  ViewOutcome outcome;
  outcome.digest = cache_key(req, backend.name());
  try {
    outcome.response = backend.infer(req);
  } catch (const TransportError&) {
    set.correction_failed = true;
    set.a_final = set.a_mode;
    return outcome;
  }
  set.correction_raw = outcome.response.raw_text;
  const std::string canon = normalize_answer(
      outcome.response.raw_text, q.answer_type,
      q.choices.empty() ? nullptr : &q.choices);
  set.a_final = canon == kUnparseable ? set.a_mode : canon;
  return outcome;
}

// Eq. 2 fan-out plus Eq. 3/4 resolution for one question. Issues the view
// calls in parallel (the backend bounds concurrency); assembles results by
// view index so completion order is irrelevant.
inline MultiViewResult run_multi_view(const QuestionRecord& q,
                                      const std::vector<ViewInput>& views,
                                      ModelBackend& backend,
                                      const OrchestratorConfig& cfg) {
  if (views.empty() || views.front().view_index != 0) {
    throw ValidationError("run_multi_view: views must start with the clean view 0");
  }
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t n_used =
      cfg.resolution_mode == ResolutionMode::single_view ? 1 : views.size();

  MultiViewResult result;
  result.answers.question_id = q.id;

  std::vector<std::future<ModelResponse>> futures;
  std::vector<std::string> digests(n_used);
  futures.reserve(n_used);
  for (std::size_t i = 0; i < n_used; ++i) {
    ModelRequest req = make_view_request(q, views[i]);
    digests[i] = cache_key(req, backend.name());
    futures.push_back(std::async(std::launch::async,
                                 [&backend, r = std::move(req)]() mutable {
                                   return backend.infer(r);
                                 }));
  }

  result.outcomes.resize(n_used);
  std::optional<std::string> first_error;
  bool config_error = false;
  std::string config_error_what;
  for (std::size_t i = 0; i < n_used; ++i) {
    try {
      result.outcomes[i] = {futures[i].get(), digests[i]};
      ++result.total_calls;
    } catch (const ConfigError& e) {
      config_error = true;
      config_error_what = e.what();
      ++result.total_calls;
    } catch (const RdrError& e) {
      if (!first_error) first_error = e.what();
      ++result.total_calls;
    }
  }
  if (config_error) throw ConfigError(config_error_what);

  if (first_error) {
    // Partial answer set: keep what succeeded, mark the question failed.
    for (std::size_t i = 0; i < n_used; ++i) {
      result.answers.answers.push_back(
          {result.outcomes[i].response.raw_text,
           normalize_answer(result.outcomes[i].response.raw_text,
                            q.answer_type,
                            q.choices.empty() ? nullptr : &q.choices)});
    }
    result.failed = true;
    result.failure = *first_error;
    result.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return result;
  }

  std::vector<std::string> canon;
  canon.reserve(n_used);
  for (std::size_t i = 0; i < n_used; ++i) {
    const std::string& raw = result.outcomes[i].response.raw_text;
    const std::string c = normalize_answer(
        raw, q.answer_type, q.choices.empty() ? nullptr : &q.choices);
    result.answers.answers.push_back({raw, c});
    canon.push_back(c);
  }

  const ConsistencyScore score = consistency_score(canon);
  result.answers.c_q_num = score.num;
  result.answers.c_q_den = score.den;
  result.answers.a_mode = score.a_mode;

  result.correction_outcome =
      resolve_final(q, result.answers, backend, cfg, views.front());
  result.total_calls += result.answers.extra_calls;
  result.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return result;
}

}  // namespace rdr
