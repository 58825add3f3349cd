// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "depthadapt/config.hpp"
#include "depthadapt/errors.hpp"
#include "depthadapt/harness.hpp"
#include "json.hpp"

namespace da = depthadapt;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string subspaces;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Config file (flat section.key = value)");
  cmd->add_option("--seed", f.seed, "Run seed (adapter init and batch order)");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--subspaces", f.subspaces, "Comma list of conv, mlp, attention");
}

da::RunConfig resolve_config(const CommonFlags& f) {
  da::RunConfig cfg = f.config.empty() ? da::RunConfig{} : da::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!f.subspaces.empty()) cfg.subspaces = f.subspaces;
  cfg.validate();
  return cfg;
}

da::DepthMetrics read_metrics(const std::string& arg) {
  if (arg.find(',') != std::string::npos) {
    std::vector<double> v;
    std::stringstream ss(arg);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        v.push_back(std::stod(item));
      } catch (const std::logic_error&) {
        da::fail(da::ErrorCategory::Format, "cannot parse metric value '" + item + "'");
      }
    }
    if (v.size() != 5) da::fail(da::ErrorCategory::Format, "expected five comma-separated metric values");
    return {v[0], v[1], v[2], v[3], v[4]};
  }
  std::ifstream in(arg);
  if (!in) da::fail(da::ErrorCategory::Io, "cannot open " + arg);
  try {
    auto j = nlohmann::json::parse(in);
    if (j.contains("final_val")) j = j["final_val"];
    if (j.contains("metrics")) j = j["metrics"];
    return da::metrics_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    da::fail(da::ErrorCategory::Format, arg + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) da::fail(da::ErrorCategory::Io, "cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage adapter and full-parameter adaptation for a toy depth network"};
  app.require_subcommand(1);

  CommonFlags train_f, ablate_f, eval_f, dump_f, info_f;

  auto* train = app.add_subcommand("train", "Run stage 1 (adapters) or stage 2 (composed update)");
  add_common(train, train_f);
  int stage = 1;
  std::string train_resume;
  train->add_option("--stage", stage, "1 or 2")->check(CLI::IsMember({1, 2}));
  train->add_option("--resume", train_resume, "Checkpoint directory to continue from (required for stage 2)");
  bool quiet = false;
  train->add_flag("--quiet", quiet, "No progress lines on stderr");

  auto* ablate = app.add_subcommand("ablate", "Stage-1 runs over the three nested subspace sets");
  add_common(ablate, ablate_f);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, eval_f);
  std::string eval_resume, eval_data, eval_csv;
  bool identity = false;
  double rescale = 1.0;
  eval->add_option("--resume", eval_resume, "Checkpoint directory");
  eval->add_option("--data", eval_data, "Dataset directory (default: generated test split)");
  eval->add_option("--per-frame-csv", eval_csv, "Write per-frame metrics here");
  eval->add_flag("--identity", identity, "Score ground truth against itself");
  eval->add_option("--rescale", rescale, "Multiply predictions before scoring");

  auto* report = app.add_subcommand("report", "Relative change of candidate metrics against a baseline");
  std::string baseline, candidate, report_json_path;
  report->add_option("--baseline", baseline, "Metrics JSON file or abs_rel,sq_rel,rmse,rmse_log,delta")->required();
  report->add_option("--candidate", candidate, "Metrics JSON file or abs_rel,sq_rel,rmse,rmse_log,delta")->required();
  report->add_option("--json", report_json_path, "Also write the report as JSON");

  auto* dump = app.add_subcommand("dump-depth", "Write predicted depth as 16-bit PGM");
  add_common(dump, dump_f);
  std::string dump_resume, dump_data;
  bool with_gt = false;
  dump->add_option("--resume", dump_resume, "Checkpoint directory")->required();
  dump->add_option("--data", dump_data, "Dataset directory (default: generated test split)");
  dump->add_flag("--with-gt", with_gt, "Also write prediction | ground truth pairs");

  auto* info = app.add_subcommand("info", "Layer registry, parameter and memory accounting");
  add_common(info, info_f);
  bool defaults = false;
  info->add_flag("--defaults", defaults, "Print every config key with its default");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto cfg = resolve_config(train_f);
      std::optional<std::filesystem::path> resume;
      if (!train_resume.empty()) resume = train_resume;
      const auto result = da::cmd_train(cfg, stage, resume, quiet ? nullptr : &std::cerr);
      std::cout << "val abs_rel " << result.report.initial_val.abs_rel << " -> " << result.report.final_val.abs_rel
                << "\ncheckpoint " << result.checkpoint_dir.string() << " (" << result.report.checkpoint_hash << ")\n";
    } else if (ablate->parsed()) {
      const auto cfg = resolve_config(ablate_f);
      const auto rows = da::cmd_ablate(cfg, &std::cerr);
      std::cout << da::ablation_table(rows);
      write_json_file((std::filesystem::path(cfg.out_dir) / "ablation.json").string(), da::ablation_to_json(rows));
    } else if (eval->parsed()) {
      const auto cfg = resolve_config(eval_f);
      da::EvalRequest req;
      if (!eval_resume.empty()) req.checkpoint = eval_resume;
      if (!eval_data.empty()) req.data_dir = eval_data;
      if (!eval_csv.empty()) req.per_frame_csv = eval_csv;
      req.identity = identity;
      req.rescale = rescale;
      std::cout << da::to_json(da::cmd_eval(cfg, req).metrics).dump(2) << "\n";
    } else if (report->parsed()) {
      const auto rows = da::cmd_report(read_metrics(baseline), read_metrics(candidate));
      std::cout << da::report_text(rows);
      if (!report_json_path.empty()) write_json_file(report_json_path, da::report_json(rows));
    } else if (dump->parsed()) {
      const auto cfg = resolve_config(dump_f);
      da::DumpRequest req;
      req.checkpoint = dump_resume;
      if (!dump_data.empty()) req.data_dir = dump_data;
      req.out_dir = dump_f.out.empty() ? std::filesystem::path(cfg.out_dir) / "depth" : std::filesystem::path(dump_f.out);
      req.with_gt = with_gt;
      std::cout << da::cmd_dump_depth(cfg, req) << " frames written to " << req.out_dir.string() << "\n";
    } else if (info->parsed()) {
      if (defaults) {
        std::cout << da::default_config_text();
      } else {
        std::cout << da::cmd_info(resolve_config(info_f)).dump(2) << "\n";
      }
    }
  } catch (const da::Error& e) {
    std::cerr << e.what() << "\n";
    return da::exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
