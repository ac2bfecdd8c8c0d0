#pragma once

// Manifest ingestion and the augmentation builder: original diagram in,
// n_views perturbed PNGs plus a replayable manifest out. Paths inside
// manifests are relative to the manifest's own directory, so an output tree
// is position independent and byte-stable across runs.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "rdr/error.hpp"
#include "rdr/parallel.hpp"
#include "rdr/perturb.hpp"
#include "rdr/png.hpp"
#include "rdr/question.hpp"

namespace rdr {

// JSON-lines manifest, one QuestionRecord per line. Validation failures name
// the line; duplicate ids are rejected.
inline std::vector<QuestionRecord> load_manifest(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RdrError("cannot open manifest: " + path.string());
  std::vector<QuestionRecord> out;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      QuestionRecord q = QuestionRecord::from_json(j);
      if (!ids.insert(q.id).second) {
        throw ValidationError("duplicate question id '" + q.id + "'");
      }
      out.push_back(std::move(q));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
  }
  return out;
}

inline void save_manifest(const std::vector<QuestionRecord>& records,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RdrError("cannot write manifest: " + path.string());
  for (const auto& q : records) {
    out << q.to_json().dump() << '\n';
  }
}

struct AugmentedView {
  int view_index = 0;
  PerturbationKind kind = PerturbationKind::gaussian_noise;
  IntensityLevel intensity = IntensityLevel::low;
  std::string path;  // relative to the augmented manifest directory
};

struct AugmentedQuestion {
  QuestionRecord question;
  std::string clean_path;
  std::vector<AugmentedView> views;
};

struct AugmentFailure {
  std::string id;
  std::string error;
};

struct AugmentedManifest {
  std::uint64_t master_seed = 0;
  int n_views = 0;
  IntensityTable table;
  std::vector<AugmentedQuestion> questions;
  std::vector<AugmentFailure> failures;

  nlohmann::json to_json() const {
    nlohmann::json jq = nlohmann::json::array();
    for (const auto& q : questions) {
      nlohmann::json jv = nlohmann::json::array();
      for (const auto& v : q.views) {
        jv.push_back({{"view_index", v.view_index},
                      {"kind", to_string(v.kind)},
                      {"intensity", to_string(v.intensity)},
                      {"path", v.path}});
      }
      jq.push_back({{"question", q.question.to_json()},
                    {"clean_path", q.clean_path},
                    {"views", jv}});
    }
    nlohmann::json jf = nlohmann::json::array();
    for (const auto& f : failures) {
      jf.push_back({{"id", f.id}, {"error", f.error}});
    }
    return {{"master_seed", master_seed},
            {"n_views", n_views},
            {"intensity_table", table.to_json()},
            {"questions", jq},
            {"failures", jf}};
  }

  static AugmentedManifest from_json(const nlohmann::json& j) {
    AugmentedManifest m;
    m.master_seed = j.at("master_seed");
    m.n_views = j.at("n_views");
    m.table = IntensityTable::from_json(j.at("intensity_table"));
    for (const auto& jq : j.at("questions")) {
      AugmentedQuestion q;
      q.question = QuestionRecord::from_json(jq.at("question"));
      q.clean_path = jq.at("clean_path");
      for (const auto& jv : jq.at("views")) {
        q.views.push_back({jv.at("view_index"),
                           kind_from_string(jv.at("kind")),
                           level_from_string(jv.at("intensity")),
                           jv.at("path")});
      }
      m.questions.push_back(std::move(q));
    }
    for (const auto& jf : j.value("failures", nlohmann::json::array())) {
      m.failures.push_back({jf.at("id"), jf.at("error")});
    }
    return m;
  }

  void save(const std::filesystem::path& dir) const {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw RdrError("cannot write " + (dir / "manifest.json").string());
    out << to_json().dump(2) << '\n';
  }

  static AugmentedManifest load(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw RdrError("cannot open " + manifest_path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(manifest_path.string() + ": " + e.what());
    }
  }
};

// Builds every question's view plan, renders all perturbed PNGs under
// <out_dir>/<qid>/view_<i>.png (view 0 is the re-encoded clean image), and
// writes a per-question plan.json plus the global manifest.json. Idempotent:
// a rerun overwrites with identical bytes. Per-question image failures are
// recorded and skipped; the run continues.
inline AugmentedManifest augment(const std::vector<QuestionRecord>& questions,
                                 std::uint64_t master_seed, int n_views,
                                 const IntensityTable& table,
                                 const std::filesystem::path& source_base_dir,
                                 const std::filesystem::path& out_dir,
                                 int workers = default_workers()) {
  if (n_views < 5 || n_views > 15) {
    throw ConfigError("augment: n_views must be in [5, 15]");
  }
  std::filesystem::create_directories(out_dir);

  struct Slot {
    bool ok = false;
    AugmentedQuestion entry;
    AugmentFailure failure;
  };
  std::vector<Slot> slots(questions.size());

  parallel_for(questions.size(), workers, [&](std::size_t qi) {
    const QuestionRecord& q = questions[qi];
    Slot& slot = slots[qi];
    try {
      const Image img = load_png(source_base_dir / q.image_path);
      const ViewPlan plan = build_view_plan(q.id, master_seed, n_views);
      const auto qdir = out_dir / q.id;
      std::filesystem::create_directories(qdir);

      AugmentedQuestion entry;
      entry.question = q;
      entry.clean_path = q.id + "/view_0.png";
      save_png(qdir / "view_0.png", img);

      nlohmann::json jplan_views = nlohmann::json::array();
      for (const auto& spec : plan.specs) {
        const Image view = apply_perturbation(img, spec, table);
        const std::string name =
            "view_" + std::to_string(spec.lineage.view_index) + ".png";
        save_png(qdir / name, view);
        entry.views.push_back({static_cast<int>(spec.lineage.view_index),
                               spec.kind, spec.intensity, q.id + "/" + name});
        jplan_views.push_back(
            {{"view_index", spec.lineage.view_index},
             {"kind", to_string(spec.kind)},
             {"intensity", to_string(spec.intensity)},
             {"lineage",
              {{"master_seed", spec.lineage.master_seed},
               {"question_id", spec.lineage.question_id},
               {"view_index", spec.lineage.view_index}}}});
      }
      std::ofstream plan_out(qdir / "plan.json", std::ios::trunc);
      plan_out << nlohmann::json{{"question_id", q.id},
                                 {"master_seed", master_seed},
                                 {"views", jplan_views}}
                      .dump(2)
               << '\n';
      slot.entry = std::move(entry);
      slot.ok = true;
    } catch (const RdrError& e) {
      slot.failure = {q.id, e.what()};
    }
  });

  AugmentedManifest manifest;
  manifest.master_seed = master_seed;
  manifest.n_views = n_views;
  manifest.table = table;
  for (auto& slot : slots) {
    if (slot.ok) {
      manifest.questions.push_back(std::move(slot.entry));
    } else {
      manifest.failures.push_back(std::move(slot.failure));
    }
  }
  manifest.save(out_dir);
  return manifest;
}

}  // namespace rdr
