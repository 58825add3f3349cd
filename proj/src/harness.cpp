// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

#include "depthadapt/errors.hpp"
#include "depthadapt/hash.hpp"
#include "depthadapt/imageio.hpp"
#include "depthadapt/optim.hpp"
#include "depthadapt/subspace.hpp"

namespace depthadapt {

namespace {

constexpr std::size_t kEvalBatch = 16;

// Shuffled passes over [0, n); batches never straddle two passes.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed) : order_(n), batch_(std::min(batch, n)), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
  }

  std::vector<std::size_t> next() {
    if (pos_ + batch_ > order_.size()) reshuffle();
    std::vector<std::size_t> out(order_.begin() + pos_, order_.begin() + pos_ + batch_);
    pos_ += batch_;
    return out;
  }

 private:
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  std::mt19937_64 rng_;
};

std::vector<std::vector<double>> predict_depth(const ToyDepthModel<float>& model, const WeightResolver<float>* resolver,
                                               const std::vector<Scene>& frames) {
  std::vector<std::vector<double>> out;
  out.reserve(frames.size());
  for (std::size_t start = 0; start < frames.size(); start += kEvalBatch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(frames.size(), start + kEvalBatch); ++i) idx.push_back(i);
    const auto pred = model.forward_depth(stack_rgb(frames, idx), resolver).detach();
    const auto values = pred.data();
    const std::size_t per = values.size() / idx.size();
    for (std::size_t b = 0; b < idx.size(); ++b) out.emplace_back(values.begin() + b * per, values.begin() + (b + 1) * per);
  }
  return out;
}

std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

std::vector<DepthMetrics> score(const std::vector<std::vector<double>>& preds, const std::vector<Scene>& frames,
                                const EvalConfig& eval, double rescale = 1.0) {
  std::vector<DepthMetrics> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    auto p = preds[i];
    if (rescale != 1.0)
      for (auto& v : p) v *= rescale;
    out.push_back(compute_metrics(p, to_double(frames[i].depth.data()), eval));
  }
  return out;
}

std::vector<Scene> frames_for(const RunConfig& cfg, const std::optional<std::filesystem::path>& data_dir) {
  if (data_dir) return load_frames(load_dataset_dir(*data_dir));
  const auto split = make_split(cfg.scene, cfg.train.n_train, cfg.train.n_val, cfg.train.n_test);
  return load_frames(split.test);
}

std::map<std::string, std::string> snapshot(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : config_to_kv(cfg))
    if (k != "run.out_dir") out.emplace(k, v);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCategory::Io, "cannot write " + path.string());
  out << text;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void log_line(std::ostream* log, const std::string& line) {
  if (log) *log << line << std::endl;
}

}  // namespace

std::vector<Scene> load_frames(const Dataset& data) {
  std::vector<Scene> frames(data.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < data.size(); ++i) frames[i] = data.get(i);
  return frames;
}

Tensor<float> stack_rgb(const std::vector<Scene>& frames, const std::vector<std::size_t>& indices) {
  const auto& s = frames.at(indices.at(0)).rgb.shape();
  std::vector<float> values;
  values.reserve(indices.size() * shape_numel(s));
  for (auto i : indices) {
    const auto d = frames.at(i).rgb.data();
    values.insert(values.end(), d.begin(), d.end());
  }
  return Tensor<float>::from(Shape{indices.size(), s[0], s[1], s[2]}, std::move(values));
}

Tensor<float> stack_depth(const std::vector<Scene>& frames, const std::vector<std::size_t>& indices) {
  const auto& s = frames.at(indices.at(0)).depth.shape();
  std::vector<float> values;
  values.reserve(indices.size() * shape_numel(s));
  for (auto i : indices) {
    const auto d = frames.at(i).depth.data();
    values.insert(values.end(), d.begin(), d.end());
  }
  return Tensor<float>::from(Shape{indices.size(), s[0], s[1]}, std::move(values));
}

std::vector<DepthMetrics> evaluate_frames(const ToyDepthModel<float>& model, const WeightResolver<float>* resolver,
                                          const std::vector<Scene>& frames, const EvalConfig& eval) {
  return score(predict_depth(model, resolver, frames), frames, eval);
}

DepthMetrics evaluate(const ToyDepthModel<float>& model, const WeightResolver<float>* resolver,
                      const std::vector<Scene>& frames, const EvalConfig& eval) {
  const auto per_frame = evaluate_frames(model, resolver, frames, eval);
  return aggregate(per_frame);
}

std::uint64_t base_weight_hash(const ToyDepthModel<float>& model) {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, t] : model.named_tensors()) h = hash_values(t.data(), fnv1a64(name, h));
  return h;
}

RestoredModel restore(const Checkpoint& ckpt) {
  RunConfig cfg;
  try {
    cfg = config_from_kv(ckpt.config);
  } catch (const Error& e) {
    fail(ErrorCategory::Format, "checkpoint config snapshot: " + e.detail());
  }
  RestoredModel r{cfg, ckpt.stage, build_model<float>(cfg.model), std::nullopt};
  for (auto& [name, t] : r.model.named_tensors()) {
    const auto* saved = ckpt.find(name);
    if (!saved) fail(ErrorCategory::Format, "checkpoint has no tensor '" + name + "'");
    if (saved->shape() != t.shape()) {
      fail(ErrorCategory::Format, "checkpoint tensor '" + name + "' has shape " + shape_str(saved->shape()) +
                                      ", model expects " + shape_str(t.shape()));
    }
    std::ranges::copy(saved->data(), t.mutable_data().begin());
  }
  if (ckpt.stage == 1) {
    const auto selection = select_subspaces(classify_layers(r.model), parse_kinds(cfg.subspaces));
    auto adapters = AdapterSet<float>::attach(selection, cfg.adapter_rank, cfg.seed);
    for (const auto& [id, a] : adapters.adapters()) {
      const auto* b = ckpt.find("adapter." + id + ".B");
      const auto* aa = ckpt.find("adapter." + id + ".A");
      if (!b || !aa) fail(ErrorCategory::Format, "checkpoint lacks adapter factors for '" + id + "'");
      adapters.set_factors(id, Tensor<float>::from(b->shape(), std::vector<float>(b->data().begin(), b->data().end())),
                           Tensor<float>::from(aa->shape(), std::vector<float>(aa->data().begin(), aa->data().end())));
    }
    r.adapters = std::move(adapters);
  }
  return r;
}

nlohmann::json to_json(const RunReport& report) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : report.curve) curve.push_back({{"step", p.step}, {"loss", p.loss}});
  nlohmann::json j = {
      {"stage", report.stage},
      {"steps", report.steps},
      {"subspaces", report.subspaces},
      {"initial_val", to_json(report.initial_val)},
      {"final_val", to_json(report.final_val)},
      {"params", to_json(report.params)},
      {"memory",
       {{"full_adam", to_json(report.full_adam)},
        {"projected", to_json(report.projected)},
        {"projected_over_full",
         report.full_adam.total_floats
             ? static_cast<double>(report.projected.total_floats) / static_cast<double>(report.full_adam.total_floats)
             : 0.0}}},
      {"base_hash_before", report.base_hash_before},
      {"base_hash_after", report.base_hash_after},
      {"checkpoint_hash", report.checkpoint_hash},
      {"loss_curve", curve},
      {"wall_seconds", report.wall_seconds},
  };
  if (!report.mixing.is_null()) j["mixing"] = report.mixing;
  return j;
}

namespace {

void write_run_outputs(const RunConfig& cfg, const RunReport& report) {
  std::string csv = "step,loss\n";
  for (const auto& p : report.curve) csv += std::to_string(p.step) + "," + fmt("%.9g", p.loss) + "\n";
  write_text(std::filesystem::path(cfg.out_dir) / "loss_curve.csv", csv);
  write_text(std::filesystem::path(cfg.out_dir) / "report.json", to_json(report).dump(2) + "\n");
}

template <typename StepFn>
void run_steps(const RunConfig& cfg, std::size_t steps, const std::vector<Scene>& train, std::uint64_t seed,
               RunReport& report, std::ostream* log, StepFn&& step_fn) {
  BatchSampler sampler(train.size(), cfg.train.batch_size, seed);
  for (std::size_t step = 1; step <= steps; ++step) {
    const auto idx = sampler.next();
    const double loss = step_fn(stack_rgb(train, idx), stack_depth(train, idx));
    if (!std::isfinite(loss)) fail(ErrorCategory::Domain, "training loss is not finite at step " + std::to_string(step));
    if (step % cfg.train.log_interval == 0 || step == steps) {
      report.curve.push_back({step, loss});
      log_line(log, "stage " + std::to_string(report.stage) + " step " + std::to_string(step) + "/" +
                        std::to_string(steps) + " loss " + fmt("%.6f", loss));
    }
  }
}

TrainResult train_stage1(const RunConfig& cfg, std::ostream* log) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto split = make_split(cfg.scene, cfg.train.n_train, cfg.train.n_val, cfg.train.n_test);
  const auto train = load_frames(split.train);
  const auto val = load_frames(split.val);

  auto model = build_model<float>(cfg.model);
  const auto registry = classify_layers(model);
  const auto selection = select_subspaces(registry, parse_kinds(cfg.subspaces));
  auto adapters = AdapterSet<float>::attach(selection, cfg.adapter_rank, cfg.seed);

  RunReport report;
  report.stage = 1;
  report.steps = cfg.train.stage1_steps;
  report.subspaces = format_kinds(parse_kinds(cfg.subspaces));
  const auto hash_before = base_weight_hash(model);
  report.base_hash_before = hex64(hash_before);
  report.initial_val = evaluate(model, &adapters, val, cfg.eval);
  log_line(log, "stage 1 step 0 val abs_rel " + fmt("%.5f", report.initial_val.abs_rel));

  Adam<float> adam(adapters.parameters(), AdamOptions{cfg.train.stage1_lr});
  const auto lambda = static_cast<float>(cfg.train.loss_lambda);
  run_steps(cfg, cfg.train.stage1_steps, train, cfg.seed, report, log, [&](const auto& rgb, const auto& gt) {
    auto loss = training_loss(model.forward_depth(rgb, &adapters), gt, lambda);
    adam.step(backward(loss));
    return static_cast<double>(loss.item());
  });

  report.final_val = evaluate(model, &adapters, val, cfg.eval);
  log_line(log, "stage 1 final val abs_rel " + fmt("%.5f", report.final_val.abs_rel));
  const auto hash_after = base_weight_hash(model);
  report.base_hash_after = hex64(hash_after);
  if (hash_after != hash_before) fail(ErrorCategory::State, "stage 1 modified frozen base weights");

  report.params = trainable_param_count(adapters, registry, 1, cfg.stage2.rank);
  report.full_adam = memory_footprint(selection, OptimizerMode::FullAdam, cfg.stage2.rank);
  report.projected = memory_footprint(selection, OptimizerMode::Projected, cfg.stage2.rank);

  Checkpoint ckpt;
  ckpt.stage = 1;
  ckpt.config = snapshot(cfg);
  ckpt.counters["stage1.steps"] = cfg.train.stage1_steps;
  ckpt.tensors = model.named_tensors();
  for (const auto* d : selection.layers()) {
    const auto* a = adapters.find(d->layer_id);
    ckpt.tensors.emplace_back("adapter." + d->layer_id + ".B", a->B);
    ckpt.tensors.emplace_back("adapter." + d->layer_id + ".A", a->A);
  }
  const auto dir = std::filesystem::path(cfg.out_dir) / "checkpoint";
  save_checkpoint(ckpt, dir);
  report.checkpoint_hash = hex64(checkpoint_hash(dir));
  report.wall_seconds = seconds_since(t0);
  write_run_outputs(cfg, report);
  return {report, dir};
}

TrainResult train_stage2(const RunConfig& cfg, const std::filesystem::path& resume, std::ostream* log) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ckpt = load_checkpoint(resume);
  auto restored = restore(ckpt);
  auto& model = restored.model;
  if (model.config().height != cfg.scene.height || model.config().width != cfg.scene.width) {
    fail(ErrorCategory::Configuration, "scene.height/scene.width do not match the checkpoint model");
  }
  std::optional<AdapterSet<float>> counted = restored.adapters;
  if (restored.adapters) restored.adapters->merge_all(model);
  const bool merged = true;

  const auto split = make_split(cfg.scene, cfg.train.n_train, cfg.train.n_val, cfg.train.n_test);
  const auto train = load_frames(split.train);
  const auto val = load_frames(split.val);

  const auto registry = classify_layers(model);
  const auto selection = select_subspaces(registry, parse_kinds(cfg.subspaces));
  auto set = Stage2Set<float>::init(selection, cfg.stage2);

  RunReport report;
  report.stage = 2;
  report.steps = cfg.train.stage2_steps;
  report.subspaces = format_kinds(parse_kinds(cfg.subspaces));
  report.base_hash_before = hex64(base_weight_hash(model));
  report.initial_val = evaluate(model, &set, val, cfg.eval);
  log_line(log, "stage 2 step 0 val abs_rel " + fmt("%.5f", report.initial_val.abs_rel));

  run_steps(cfg, cfg.train.stage2_steps, train, cfg.seed ^ (0x2ULL << 32), report, log,
            [&](const auto& rgb, const auto& gt) { return static_cast<double>(stage2_step(model, rgb, gt, set, merged)); });

  report.final_val = evaluate(model, &set, val, cfg.eval);
  log_line(log, "stage 2 final val abs_rel " + fmt("%.5f", report.final_val.abs_rel));

  Checkpoint out;
  out.stage = 2;
  out.config = snapshot(cfg);
  for (const auto& [k, v] : ckpt.counters)
    if (k.rfind("stage1.", 0) == 0) out.counters[k] = v;
  out.counters["stage2.steps"] = cfg.train.stage2_steps;
  report.mixing = nlohmann::json::object();
  for (const auto& [id, s] : set.states()) {
    out.counters["stage2." + id + ".step_counter"] = s.step_counter;
    report.mixing[id] = {{"alpha", s.alpha.item()}, {"beta", s.beta.item()}, {"step_counter", s.step_counter}};
  }
  set.materialize(model);
  for (auto& t : model.named_tensors()) t.second.set_requires_grad(false);
  report.base_hash_after = hex64(base_weight_hash(model));
  out.tensors = model.named_tensors();

  if (!counted) counted = AdapterSet<float>::attach(selection, restored.config.adapter_rank, restored.config.seed);
  report.params = trainable_param_count(*counted, registry, 2, cfg.stage2.rank);
  report.full_adam = memory_footprint(selection, OptimizerMode::FullAdam, cfg.stage2.rank);
  report.projected = memory_footprint(selection, OptimizerMode::Projected, cfg.stage2.rank);

  const auto dir = std::filesystem::path(cfg.out_dir) / "checkpoint";
  save_checkpoint(out, dir);
  report.checkpoint_hash = hex64(checkpoint_hash(dir));
  report.wall_seconds = seconds_since(t0);
  write_run_outputs(cfg, report);
  return {report, dir};
}

}  // namespace

TrainResult cmd_train(const RunConfig& cfg, int stage, const std::optional<std::filesystem::path>& resume,
                      std::ostream* log) {
  cfg.validate();
  if (stage != 1 && stage != 2) fail(ErrorCategory::Configuration, "--stage must be 1 or 2");
  if (stage == 2 && !resume) fail(ErrorCategory::Schedule, "stage 2 requires --resume with a stage-1 checkpoint");
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) fail(ErrorCategory::Io, "cannot create " + cfg.out_dir + ": " + ec.message());
  return stage == 1 ? train_stage1(cfg, log) : train_stage2(cfg, *resume, log);
}

std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, std::ostream* log) {
  cfg.validate();
  const std::pair<const char*, const char*> rows[] = {
      {"MLP", "mlp"}, {"MLP+Conv", "mlp,conv"}, {"MLP+Conv+Attention", "mlp,conv,attention"}};
  std::vector<AblationRow> out;
  for (const auto& [name, kinds] : rows) {
    RunConfig c = cfg;
    c.subspaces = kinds;
    c.out_dir = (std::filesystem::path(cfg.out_dir) / (std::string("ablate_") + kinds)).string();
    std::replace(c.out_dir.begin(), c.out_dir.end(), ',', '_');
    log_line(log, std::string("ablation row ") + name);
    const auto result = cmd_train(c, 1, std::nullopt, log);
    EvalRequest req;
    req.checkpoint = result.checkpoint_dir;
    out.push_back({name, format_kinds(parse_kinds(kinds)), result.report.params.adapter_params, cmd_eval(c, req).metrics});
  }
  return out;
}

nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"name", r.name},
                 {"subspaces", r.subspaces},
                 {"trainable_params", r.trainable_params},
                 {"metrics", to_json(r.metrics)}});
  }
  return {{"rows", j}};
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %10s %8s %8s %8s %9s %8s\n", "subspaces", "params", "abs_rel", "sq_rel", "rmse",
                "rmse_log", "delta");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-20s %10llu %8.3f %8.3f %8.3f %9.3f %8.3f\n", r.name.c_str(),
                  static_cast<unsigned long long>(r.trainable_params), r.metrics.abs_rel, r.metrics.sq_rel,
                  r.metrics.rmse, r.metrics.rmse_log, r.metrics.delta);
    out += buf;
  }
  return out;
}

EvalResult cmd_eval(const RunConfig& cfg, const EvalRequest& request) {
  cfg.eval.validate();
  if (!(request.rescale > 0.0) || !std::isfinite(request.rescale)) {
    fail(ErrorCategory::Configuration, "rescale factor must be positive and finite");
  }
  if (!request.identity && !request.checkpoint) {
    fail(ErrorCategory::Configuration, "eval needs a checkpoint unless the identity predictor is selected");
  }
  const auto frames = frames_for(cfg, request.data_dir);
  if (frames.empty()) fail(ErrorCategory::Evaluation, "evaluation dataset is empty");

  std::vector<std::vector<double>> preds;
  if (request.identity) {
    for (const auto& f : frames) preds.push_back(to_double(f.depth.data()));
  } else {
    const auto restored = restore(load_checkpoint(*request.checkpoint));
    const WeightResolver<float>* resolver = restored.adapters ? &*restored.adapters : nullptr;
    preds = predict_depth(restored.model, resolver, frames);
  }
  EvalResult result;
  result.per_frame = score(preds, frames, cfg.eval, request.rescale);
  result.metrics = aggregate(result.per_frame);

  if (request.per_frame_csv) {
    std::string csv = "frame,abs_rel,sq_rel,rmse,rmse_log,delta\n";
    for (std::size_t i = 0; i < result.per_frame.size(); ++i) {
      const auto& m = result.per_frame[i];
      csv += std::to_string(i) + "," + fmt("%.9g", m.abs_rel) + "," + fmt("%.9g", m.sq_rel) + "," +
             fmt("%.9g", m.rmse) + "," + fmt("%.9g", m.rmse_log) + "," + fmt("%.9g", m.delta) + "\n";
    }
    write_text(*request.per_frame_csv, csv);
  }
  return result;
}

double round_pct(double pct) {
  const double r = std::nearbyint(pct * 10.0) / 10.0;
  return r == 0.0 ? 0.0 : r;
}

std::vector<ReportRow> cmd_report(const DepthMetrics& baseline, const DepthMetrics& candidate) {
  const std::pair<const char*, double DepthMetrics::*> fields[] = {{"Abs Rel", &DepthMetrics::abs_rel},
                                                                    {"Sq Rel", &DepthMetrics::sq_rel},
                                                                    {"RMSE", &DepthMetrics::rmse},
                                                                    {"RMSE log", &DepthMetrics::rmse_log},
                                                                    {"delta<1.25", &DepthMetrics::delta}};
  std::vector<ReportRow> rows;
  for (const auto& [name, member] : fields) {
    const double b = baseline.*member, c = candidate.*member;
    if (b == 0.0 || !std::isfinite(b)) fail(ErrorCategory::Report, std::string("baseline ") + name + " is zero");
    rows.push_back({name, b, c, round_pct(100.0 * (c - b) / b)});
  }
  return rows;
}

std::string report_text(const std::vector<ReportRow>& rows) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-12s %10s %10s %9s\n", "metric", "baseline", "candidate", "change");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-12s %10.3f %10.3f %+8.1f%%\n", r.metric.c_str(), r.baseline, r.candidate,
                  r.change_pct);
    out += buf;
  }
  return out;
}

nlohmann::json report_json(const std::vector<ReportRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"metric", r.metric},
                 {"baseline", std::nearbyint(r.baseline * 1000.0) / 1000.0},
                 {"candidate", std::nearbyint(r.candidate * 1000.0) / 1000.0},
                 {"change_pct", r.change_pct}});
  }
  return {{"rows", j}};
}

std::size_t cmd_dump_depth(const RunConfig& cfg, const DumpRequest& request) {
  const auto restored = restore(load_checkpoint(request.checkpoint));
  const auto frames = frames_for(cfg, request.data_dir);
  const WeightResolver<float>* resolver = restored.adapters ? &*restored.adapters : nullptr;
  const auto preds = predict_depth(restored.model, resolver, frames);

  std::error_code ec;
  std::filesystem::create_directories(request.out_dir, ec);
  if (ec) fail(ErrorCategory::Io, "cannot create " + request.out_dir.string() + ": " + ec.message());
  const double lo = restored.config.model.min_depth, hi = restored.config.model.max_depth;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::size_t h = frames[i].depth.dim(0), w = frames[i].depth.dim(1);
    const std::vector<float> pred(preds[i].begin(), preds[i].end());
    const auto img = depth_to_gray16(pred, w, h, lo, hi);
    char stem[32];
    std::snprintf(stem, sizeof stem, "frame_%04zu", i);
    write_pgm16(request.out_dir / (std::string(stem) + "_depth.pgm"), img);
    if (request.with_gt) {
      const auto gt = depth_to_gray16(frames[i].depth.data(), w, h, lo, hi);
      Gray16 pair{2 * w, h, std::vector<std::uint16_t>(2 * w * h)};
      for (std::size_t y = 0; y < h; ++y) {
        std::copy_n(img.pixels.begin() + y * w, w, pair.pixels.begin() + y * 2 * w);
        std::copy_n(gt.pixels.begin() + y * w, w, pair.pixels.begin() + y * 2 * w + w);
      }
      write_pgm16(request.out_dir / (std::string(stem) + "_pair.pgm"), pair);
    }
  }
  return frames.size();
}

nlohmann::json cmd_info(const RunConfig& cfg) {
  cfg.validate();
  const auto model = build_model<float>(cfg.model);
  const auto registry = classify_layers(model);
  const auto selection = select_subspaces(registry, parse_kinds(cfg.subspaces));
  const auto adapters = AdapterSet<float>::attach(selection, cfg.adapter_rank, cfg.seed);
  const auto c = counts(registry);
  const auto full = memory_footprint(selection, OptimizerMode::FullAdam, cfg.stage2.rank);
  const auto proj = memory_footprint(selection, OptimizerMode::Projected, cfg.stage2.rank);
  return {
      {"registry", registry_to_json(registry)},
      {"counts", {{"conv", c.conv}, {"mlp", c.mlp}, {"attention", c.attention}}},
      {"subspaces", format_kinds(parse_kinds(cfg.subspaces))},
      {"params_stage1", to_json(trainable_param_count(adapters, registry, 1, cfg.stage2.rank))},
      {"params_stage2", to_json(trainable_param_count(adapters, registry, 2, cfg.stage2.rank))},
      {"memory",
       {{"full_adam", to_json(full)},
        {"projected", to_json(proj)},
        {"projected_over_full", static_cast<double>(proj.total_floats) / static_cast<double>(full.total_floats)}}},
  };
}

}  // namespace depthadapt
