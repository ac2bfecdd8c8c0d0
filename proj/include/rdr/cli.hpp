#pragma once

// Command-line surface: synth | perturb | eval | report. Every command is
// deterministic given its flags and seed; run directories carry full
// provenance (resolved config, intensity table, version).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rdr/amcv.hpp"
#include "rdr/backend.hpp"
#include "rdr/dataset.hpp"
#include "rdr/http_backend.hpp"
#include "rdr/metrics.hpp"
#include "rdr/oracle.hpp"
#include "rdr/report.hpp"
#include "rdr/runner.hpp"
#include "rdr/synth.hpp"
#include "rdr/version.hpp"

namespace rdr {

namespace cli_detail {

inline IntensityTable load_table_or_default(const std::string& path) {
  if (path.empty()) return IntensityTable::defaults();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open intensity table: " + path);
  try {
    return IntensityTable::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("intensity table " + path + ": " + e.what());
  }
}

inline std::filesystem::path resolve_augmented_manifest(
    const std::string& given) {
  std::filesystem::path p(given);
  if (std::filesystem::is_directory(p)) p /= "manifest.json";
  return p;
}

struct EvalFlags {
  std::string augmented;
  std::string backend = "oracle";
  std::string mode = "full_amcv";
  double tau = 0.6;
  std::string out;
  std::string cache_dir;
  std::string endpoint;
  std::string model = "scripted-oracle";
  std::string api_key_env = "RDR_API_KEY";
  int max_in_flight = 4;
  int timeout_ms = 60'000;
  int max_attempts = 3;
  int backoff_ms = 250;
  std::string stub_answer = "B";
  int workers = default_workers();
};

inline std::shared_ptr<ModelBackend> build_backend(const EvalFlags& f) {
  std::shared_ptr<ModelBackend> inner;
  if (f.backend == "oracle") {
    inner = std::make_shared<OracleBackend>();
  } else if (f.backend == "stub") {
    inner = std::make_shared<ConstantBackend>(f.stub_answer);
  } else if (f.backend == "http") {
    BackendConfig cfg;
    cfg.endpoint_url = f.endpoint;
    cfg.model_name = f.model;
    cfg.api_key_env_var = f.api_key_env;
    cfg.max_in_flight = f.max_in_flight;
    cfg.timeout_ms = f.timeout_ms;
    cfg.retry.max_attempts = f.max_attempts;
    cfg.retry.base_backoff_ms = f.backoff_ms;
    if (cfg.endpoint_url.empty()) {
      throw ConfigError("--backend http requires --endpoint");
    }
    inner = std::make_shared<HttpChatBackend>(cfg);
  } else if (f.backend == "replay") {
    if (f.cache_dir.empty()) {
      throw ConfigError("--backend replay requires --cache-dir");
    }
    return std::make_shared<CachedBackend>(nullptr, f.cache_dir, f.model);
  } else {
    throw ConfigError("unknown backend '" + f.backend +
                      "' (expected oracle|stub|http|replay)");
  }
  if (!f.cache_dir.empty()) {
    inner = std::make_shared<CachedBackend>(inner, f.cache_dir, inner->name());
  }
  return std::make_shared<BoundedBackend>(inner, f.max_in_flight);
}

inline int cmd_synth(int count, std::uint64_t seed, const std::string& out) {
  const std::filesystem::path out_dir(out);
  const auto records = synth_generate(count, seed, out_dir);
  save_manifest(records, out_dir / "manifest.jsonl");
  std::cout << "wrote " << records.size() << " questions to " << out << "\n";
  return 0;
}

inline int cmd_perturb(const std::string& manifest, int views,
                       std::uint64_t seed, const std::string& table_path,
                       const std::string& out, int workers) {
  const std::filesystem::path mpath(manifest);
  const auto questions = load_manifest(mpath);
  const auto table = load_table_or_default(table_path);
  const auto result = augment(questions, seed, views, table,
                              mpath.parent_path(), out, workers);
  std::cout << "augmented " << result.questions.size() << " questions ("
            << result.failures.size() << " failed) into " << out << "\n";
  for (const auto& f : result.failures) {
    std::cerr << "  failed: " << f.id << ": " << f.error << "\n";
  }
  return result.failures.empty() ? 0 : 1;
}

inline int cmd_eval(const EvalFlags& f) {
  const auto manifest_path = resolve_augmented_manifest(f.augmented);
  const auto manifest = AugmentedManifest::load(manifest_path);
  const auto backend = build_backend(f);

  OrchestratorConfig cfg;
  cfg.tau = f.tau;
  cfg.n_views = manifest.n_views;
  cfg.resolution_mode = resolution_mode_from_string(f.mode);
  cfg.validate();

  const std::filesystem::path out_dir(f.out);
  std::filesystem::create_directories(out_dir);

  const nlohmann::json run_config = {
      {"harness_version", kVersion},
      {"augmented_manifest", manifest_path.string()},
      {"backend", f.backend},
      {"model_name", backend->name()},
      {"resolution_mode", f.mode},
      {"tau", f.tau},
      {"n_views", manifest.n_views},
      {"master_seed", manifest.master_seed},
      {"intensity_table", manifest.table.to_json()},
      {"cache_dir", f.cache_dir},
      {"max_in_flight", f.max_in_flight},
      {"workers", f.workers},
  };
  {
    std::ofstream rc(out_dir / "run_config.json", std::ios::trunc);
    rc << run_config.dump(2) << '\n';
  }

  const auto stats = run_evaluation(manifest, manifest_path.parent_path(),
                                    *backend, cfg, out_dir / "answers.jsonl",
                                    f.workers);
  std::cout << "evaluated " << stats.questions << " questions ("
            << stats.failed << " failed, " << stats.total_calls
            << " model calls); log: " << (out_dir / "answers.jsonl").string()
            << "\n";
  return stats.failed == 0 ? 0 : 1;
}

struct ReportFlags {
  std::vector<std::string> logs;  // label=path
  std::string ablation_from;
  std::vector<std::string> reference_rows;  // label=ca,prs,vdc
  std::string prs_mode = "amcv_final";
  std::string out;
};

inline int cmd_report(const ReportFlags& f) {
  const PrsMode mode =
      f.prs_mode == "per_view" ? PrsMode::per_view : PrsMode::amcv_final;
  if (f.prs_mode != "per_view" && f.prs_mode != "amcv_final") {
    throw ConfigError("--prs-mode must be per_view or amcv_final");
  }
  ReportBundle bundle;
  for (const auto& spec : f.logs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--log expects LABEL=PATH, got '" + spec + "'");
    }
    const std::string label = spec.substr(0, eq);
    const auto log = AnswerLog::load(spec.substr(eq + 1));
    bundle.reports.push_back({label, compute_report(log, mode)});
  }
  if (!f.ablation_from.empty()) {
    const auto full = AnswerLog::load(f.ablation_from);
    for (auto m : {ResolutionMode::single_view, ResolutionMode::majority_vote,
                   ResolutionMode::full_amcv}) {
      const auto resolved = reresolve_log(full, m);
      bundle.ablation.push_back(
          {to_string(m), compute_report(resolved, PrsMode::amcv_final)});
    }
  }
  for (const auto& row : f.reference_rows) {
    const auto eq = row.find('=');
    double ca = 0, prs = 0, vdc = 0;
    if (eq == std::string::npos ||
        std::sscanf(row.c_str() + eq + 1, "%lf,%lf,%lf", &ca, &prs, &vdc) != 3) {
      throw ConfigError("--row expects LABEL=CA,PRS,VDC, got '" + row + "'");
    }
    bundle.reference_rows.push_back(
        ScoreRow::from_values(row.substr(0, eq), ca, prs, vdc));
  }
  if (bundle.reports.empty() && bundle.ablation.empty()) {
    throw ConfigError("report: no input logs given (use --log and/or "
                      "--ablation-from)");
  }
  write_report_files(bundle, f.out);
  std::cout << "wrote report to " << f.out << "\n";
  return 0;
}

}  // namespace cli_detail

inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Deterministic robustness evaluation harness for diagram QA"};
  app.require_subcommand(1);

  // synth
  int synth_count = 0;
  std::uint64_t synth_seed = 42;
  std::string synth_out;
  auto* synth = app.add_subcommand(
      "synth", "Generate synthetic bar-chart questions with ground truth");
  synth->add_option("--count", synth_count, "number of questions")->required();
  synth->add_option("--seed", synth_seed, "master seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  // perturb
  std::string perturb_manifest, perturb_table, perturb_out;
  int perturb_views = 10;
  std::uint64_t perturb_seed = 42;
  int perturb_workers = default_workers();
  auto* perturb = app.add_subcommand(
      "perturb", "Render the perturbed views for every question");
  perturb->add_option("--manifest", perturb_manifest, "question manifest (jsonl)")
      ->required();
  perturb->add_option("--views", perturb_views, "perturbed views per question");
  perturb->add_option("--seed", perturb_seed, "master seed");
  perturb->add_option("--table", perturb_table, "intensity table JSON");
  perturb->add_option("--out", perturb_out, "output directory")->required();
  perturb->add_option("--workers", perturb_workers, "parallel workers");

  // eval
  cli_detail::EvalFlags ef;
  auto* eval = app.add_subcommand(
      "eval", "Run multi-view inference over an augmented tree");
  eval->add_option("--augmented", ef.augmented,
                   "augmented manifest.json (or its directory)")
      ->required();
  eval->add_option("--backend", ef.backend, "oracle|stub|http|replay");
  eval->add_option("--mode", ef.mode, "single_view|majority_vote|full_amcv");
  eval->add_option("--tau", ef.tau, "consistency threshold");
  eval->add_option("--out", ef.out, "run output directory")->required();
  eval->add_option("--cache-dir", ef.cache_dir, "replay cache directory");
  eval->add_option("--endpoint", ef.endpoint, "chat-completions URL");
  eval->add_option("--model", ef.model, "model name");
  eval->add_option("--api-key-env", ef.api_key_env,
                   "environment variable holding the API key");
  eval->add_option("--max-in-flight", ef.max_in_flight, "parallel requests");
  eval->add_option("--timeout-ms", ef.timeout_ms, "request timeout");
  eval->add_option("--max-attempts", ef.max_attempts, "retry attempts");
  eval->add_option("--backoff-ms", ef.backoff_ms, "retry backoff base");
  eval->add_option("--stub-answer", ef.stub_answer, "constant stub answer");
  eval->add_option("--workers", ef.workers, "parallel questions");

  // report
  cli_detail::ReportFlags rf;
  auto* report = app.add_subcommand(
      "report", "Compute metrics and render tables from answer logs");
  report->add_option("--log", rf.logs, "LABEL=PATH answer log (repeatable)");
  report->add_option("--ablation-from", rf.ablation_from,
                     "full_amcv log to re-resolve into the ablation table");
  report->add_option("--row", rf.reference_rows,
                     "LABEL=CA,PRS,VDC reference row (repeatable)");
  report->add_option("--prs-mode", rf.prs_mode, "per_view|amcv_final");
  report->add_option("--out", rf.out, "report output directory")->required();

  std::vector<const char*> argv;
  argv.push_back("rdr");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) {
      return cli_detail::cmd_synth(synth_count, synth_seed, synth_out);
    }
    if (perturb->parsed()) {
      return cli_detail::cmd_perturb(perturb_manifest, perturb_views,
                                     perturb_seed, perturb_table, perturb_out,
                                     perturb_workers);
    }
    if (eval->parsed()) return cli_detail::cmd_eval(ef);
    if (report->parsed()) return cli_detail::cmd_report(rf);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const LogFormatError& e) {
    std::cerr << "log format error: " << e.what() << "\n";
    return 2;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return 3;
  } catch (const RdrError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace rdr
