// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training schedules, evaluation and reporting behind the command-line tool.
//
// A run directory holds:
//   checkpoint/       see checkpoint.hpp
//   loss_curve.csv    step,loss every train.log_interval steps (and the last step)
//   report.json       metrics, parameter/memory accounting, hashes, wall time

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "depthadapt/adapters.hpp"
#include "depthadapt/checkpoint.hpp"
#include "depthadapt/config.hpp"
#include "depthadapt/metrics.hpp"
#include "depthadapt/model.hpp"
#include "depthadapt/scenes.hpp"
#include "depthadapt/stage2.hpp"
#include "json.hpp"

namespace depthadapt {

/// Frames held in memory, generated once.
std::vector<Scene> load_frames(const Dataset& data);

/// Stacks frames[indices] into B x 3 x H x W and B x H x W tensors.
Tensor<float> stack_rgb(const std::vector<Scene>& frames, const std::vector<std::size_t>& indices);
Tensor<float> stack_depth(const std::vector<Scene>& frames, const std::vector<std::size_t>& indices);

/// Per-frame metrics of the model's depth on every frame.
std::vector<DepthMetrics> evaluate_frames(const ToyDepthModel<float>& model, const WeightResolver<float>* resolver,
                                          const std::vector<Scene>& frames, const EvalConfig& eval);
DepthMetrics evaluate(const ToyDepthModel<float>& model, const WeightResolver<float>* resolver,
                      const std::vector<Scene>& frames, const EvalConfig& eval);

/// FNV-1a over the bytes of every model tensor.
std::uint64_t base_weight_hash(const ToyDepthModel<float>& model);

/// Model (and stage-1 adapters, if any) rebuilt from a checkpoint.
struct RestoredModel {
  RunConfig config;
  int stage = 1;
  ToyDepthModel<float> model;
  std::optional<AdapterSet<float>> adapters;
};
RestoredModel restore(const Checkpoint& ckpt);

struct LossPoint {
  std::size_t step = 0;
  double loss = 0.0;
};

struct RunReport {
  int stage = 1;
  std::size_t steps = 0;
  std::string subspaces;
  DepthMetrics initial_val;
  DepthMetrics final_val;
  ParamCount params;
  MemoryFootprint full_adam;
  MemoryFootprint projected;
  std::string base_hash_before;
  std::string base_hash_after;
  std::string checkpoint_hash;
  std::vector<LossPoint> curve;
  nlohmann::json mixing;  // stage 2: per-layer alpha, beta, step counter
  double wall_seconds = 0.0;
};

nlohmann::json to_json(const RunReport& report);

struct TrainResult {
  RunReport report;
  std::filesystem::path checkpoint_dir;
};

/// Stage 1 trains adapters only and fails with a state error if any base
/// weight changed. Stage 2 needs `resume` (schedule error otherwise), merges
/// the stage-1 adapters and runs the composed update.
TrainResult cmd_train(const RunConfig& cfg, int stage, const std::optional<std::filesystem::path>& resume,
                      std::ostream* log = nullptr);

struct AblationRow {
  std::string name;
  std::string subspaces;
  std::uint64_t trainable_params = 0;
  DepthMetrics metrics;
};

/// Three stage-1 runs with {mlp}, {mlp,conv}, {mlp,conv,attention}, same
/// seed, each scored on the test split.
std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, std::ostream* log = nullptr);
nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows);
std::string ablation_table(const std::vector<AblationRow>& rows);

struct EvalRequest {
  std::optional<std::filesystem::path> checkpoint;  // required unless identity
  std::optional<std::filesystem::path> data_dir;    // default: test split of the config
  bool identity = false;                            // predict ground truth
  double rescale = 1.0;                             // multiply predictions
  std::optional<std::filesystem::path> per_frame_csv;
};

struct EvalResult {
  DepthMetrics metrics;
  std::vector<DepthMetrics> per_frame;
};

EvalResult cmd_eval(const RunConfig& cfg, const EvalRequest& request);

struct ReportRow {
  std::string metric;
  double baseline = 0.0;
  double candidate = 0.0;
  double change_pct = 0.0;  // 100 (candidate - baseline) / baseline, half-even to 0.1
};

/// Report error if any baseline field is zero.
std::vector<ReportRow> cmd_report(const DepthMetrics& baseline, const DepthMetrics& candidate);
std::string report_text(const std::vector<ReportRow>& rows);
nlohmann::json report_json(const std::vector<ReportRow>& rows);

/// Half-even rounding of a percentage to one decimal.
double round_pct(double pct);

struct DumpRequest {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> data_dir;
  std::filesystem::path out_dir;
  bool with_gt = false;
};

/// frame_XXXX_depth.pgm per frame, and frame_XXXX_pair.pgm (prediction | ground
/// truth) when with_gt is set. Returns the number of frames written.
std::size_t cmd_dump_depth(const RunConfig& cfg, const DumpRequest& request);

/// Registry, counts, parameter and optimizer-memory accounting for a config.
nlohmann::json cmd_info(const RunConfig& cfg);

}  // namespace depthadapt
