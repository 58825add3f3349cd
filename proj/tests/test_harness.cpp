// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "depthadapt/checkpoint.hpp"
#include "depthadapt/config.hpp"
#include "depthadapt/harness.hpp"
#include "depthadapt/imageio.hpp"
#include "doctest.h"
#include "support/expect_error.hpp"

using namespace depthadapt;
using testsupport::catch_error;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("depthadapt_test_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig small_config(const fs::path& out) {
  RunConfig cfg;
  cfg.model.height = cfg.model.width = cfg.scene.height = cfg.scene.width = 16;
  cfg.model.base_channels = 8;
  cfg.model.mlp_hidden = 16;
  cfg.train.n_train = 16;
  cfg.train.n_val = 4;
  cfg.train.n_test = 4;
  cfg.train.batch_size = 4;
  cfg.train.stage1_steps = 3;
  cfg.train.stage2_steps = 2;
  cfg.train.log_interval = 1;
  cfg.stage2.rank = 2;
  cfg.out_dir = out.string();
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

EvalRequest eval_request(std::optional<fs::path> checkpoint, double rescale = 1.0,
                         std::optional<fs::path> csv = std::nullopt) {
  EvalRequest r;
  r.checkpoint = std::move(checkpoint);
  r.rescale = rescale;
  r.per_frame_csv = std::move(csv);
  return r;
}

DumpRequest dump_request(fs::path checkpoint, fs::path out, bool with_gt) {
  DumpRequest r;
  r.checkpoint = std::move(checkpoint);
  r.out_dir = std::move(out);
  r.with_gt = with_gt;
  return r;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + DEPTHADAPT_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config text parses, validates and round-trips through key/value form") {
  const auto cfg = parse_config("# comment\nadapter.rank = 2\nadapter.subspaces = mlp , conv\nrun.seed = 9\n");
  CHECK(cfg.adapter_rank == 2);
  CHECK(cfg.seed == 9);
  const auto kv = config_to_kv(cfg);
  const auto back = config_from_kv({kv.begin(), kv.end()});
  CHECK(config_to_kv(back) == kv);
  CHECK(config_to_kv(parse_config(default_config_text())) == config_to_kv(RunConfig{}));

  auto err = catch_error([] { parse_config("model.colour = red\n"); });
  CHECK(err.category == ErrorCategory::Configuration);
  CHECK(err.message.find("line 1") != std::string::npos);
  CHECK(catch_error([] { parse_config("adapter.rank\n"); }).category == ErrorCategory::Configuration);
  CHECK(catch_error([] { parse_config("adapter.rank = two\n"); }).category == ErrorCategory::Configuration);
  CHECK(catch_error([] { parse_config("adapter.subspaces = norm\n"); }).category == ErrorCategory::Configuration);
  CHECK(catch_error([] { parse_config("scene.height = 32\n"); }).category == ErrorCategory::Configuration);
  CHECK(catch_error([] { load_config("/nonexistent/depthadapt.cfg"); }).category == ErrorCategory::Io);
}

TEST_CASE("checkpoints round-trip byte for byte") {
  const auto dir = scratch("ckpt");
  Checkpoint c;
  c.stage = 2;
  c.config = {{"adapter.rank", "4"}};
  c.counters = {{"stage2.steps", 7}};
  c.tensors = {{"w", Tensor<float>::from({2, 3}, {1, -2, 3.5f, 0, 1e-30f, -0.0f})}, {"s", Tensor<float>::scalar(4)}};
  save_checkpoint(c, dir / "a");
  const auto loaded = load_checkpoint(dir / "a");
  CHECK(loaded.stage == 2);
  CHECK(loaded.config == c.config);
  CHECK(loaded.counters == c.counters);
  REQUIRE(loaded.find("w") != nullptr);
  CHECK(same(*loaded.find("w"), c.tensors[0].second));
  save_checkpoint(loaded, dir / "b");
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  CHECK(slurp(dir / "a" / "tensors.bin") == slurp(dir / "b" / "tensors.bin"));
  CHECK(checkpoint_hash(dir / "a") == checkpoint_hash(dir / "b"));
  CHECK(hex64(0xabcULL) == "0000000000000abc");
  fs::remove_all(dir);
}

TEST_CASE("corrupt checkpoints are format errors") {
  const auto dir = scratch("badckpt");
  Checkpoint c;
  c.tensors = {{"w", Tensor<float>::zeros({4})}};
  save_checkpoint(c, dir);
  const auto blob = slurp(dir / "tensors.bin");
  std::ofstream(dir / "tensors.bin", std::ios::binary) << blob.substr(0, 8);
  CHECK(catch_error([&] { load_checkpoint(dir); }).category == ErrorCategory::Format);
  std::ofstream(dir / "manifest.json") << "not json";
  CHECK(catch_error([&] { load_checkpoint(dir); }).category == ErrorCategory::Format);
  fs::remove_all(dir);
  CHECK(catch_error([&] { load_checkpoint(dir); }).category == ErrorCategory::Format);
}

TEST_CASE("16-bit PGM header and endpoint payloads") {
  const std::vector<float> lo(6, 0.1f), hi(6, 15.0f);
  const auto g0 = depth_to_gray16(lo, 3, 2, 0.1, 15.0), g1 = depth_to_gray16(hi, 3, 2, 0.1, 15.0);
  for (auto v : g0.pixels) CHECK(v == 0);
  for (auto v : g1.pixels) CHECK(v == 65535);
  const auto bytes = encode_pgm16(g1);
  const std::string header = "P5\n3 2\n65535\n";
  REQUIRE(bytes.size() == header.size() + 12);
  CHECK(std::string(bytes.begin(), bytes.begin() + long(header.size())) == header);
  for (std::size_t i = header.size(); i < bytes.size(); ++i) CHECK(bytes[i] == 0xff);

  const auto dir = scratch("pgm");
  fs::create_directories(dir);
  Gray16 ramp{2, 2, {0, 1, 256, 65535}};
  write_pgm16(dir / "r.pgm", ramp);
  CHECK(read_pgm16(dir / "r.pgm").pixels == ramp.pixels);
  std::ofstream(dir / "bad.pgm") << "P2\n2 2\n255\n";
  CHECK(catch_error([&] { read_pgm16(dir / "bad.pgm"); }).category == ErrorCategory::Format);
  CHECK(catch_error([&] { read_pgm16(dir / "missing.pgm"); }).category == ErrorCategory::Io);
  fs::remove_all(dir);
}

TEST_CASE("report arithmetic") {
  const DepthMetrics base{0.052, 0.362, 4.464, 0.073, 0.979}, cand{0.049, 0.325, 4.280, 0.069, 0.983};
  const auto rows = cmd_report(base, cand);
  REQUIRE(rows.size() == 5);
  CHECK(rows[1].metric == "Sq Rel");
  CHECK(rows[1].change_pct == -10.2);
  CHECK(rows[2].change_pct == -4.1);
  CHECK(rows[3].change_pct == -5.5);
  CHECK(rows[4].change_pct == 0.4);
  for (const auto& r : cmd_report(base, base)) CHECK(r.change_pct == 0.0);
  CHECK(report_text(rows).find("-10.2%") != std::string::npos);
  CHECK(report_json(rows)["rows"][1]["change_pct"] == -10.2);
  CHECK(catch_error([&] { cmd_report(DepthMetrics{0, 1, 1, 1, 1}, cand); }).category == ErrorCategory::Report);
  CHECK(round_pct(-0.04) == 0.0);
  CHECK_FALSE(std::signbit(round_pct(-0.04)));
}

TEST_CASE("eval: identity predictor, rescale invariance and per-frame CSV") {
  const auto dir = scratch("eval");
  auto cfg = small_config(dir);
  CHECK(cmd_eval(cfg, [] { EvalRequest r; r.identity = true; return r; }()).metrics == DepthMetrics{0, 0, 0, 0, 1});

  const auto trained = cmd_train(cfg, 1, std::nullopt);
  const auto plain = cmd_eval(cfg, eval_request(trained.checkpoint_dir));
  const auto scaled = cmd_eval(cfg, eval_request(trained.checkpoint_dir, 7.0));
  CHECK(to_json(plain.metrics) == to_json(scaled.metrics));

  const auto csv = dir / "frames.csv";
  const auto r = cmd_eval(cfg, eval_request(trained.checkpoint_dir, 1.0, csv));
  std::ifstream in(csv);
  std::string line;
  std::size_t lines = 0;
  std::getline(in, line);
  CHECK(line == "frame,abs_rel,sq_rel,rmse,rmse_log,delta");
  while (std::getline(in, line)) ++lines;
  CHECK(lines == cfg.train.n_test);
  CHECK(r.per_frame.size() == cfg.train.n_test);

  CHECK(catch_error([&] { cmd_eval(cfg, EvalRequest{}); }).category == ErrorCategory::Configuration);
  CHECK(catch_error([&] { cmd_eval(cfg, eval_request(dir / "nowhere")); }).category ==
        ErrorCategory::Format);
  fs::remove_all(dir);
}

TEST_CASE("a zero-step run saves the initialization and a well-formed report") {
  const auto dir = scratch("zero");
  auto cfg = small_config(dir);
  cfg.train.stage1_steps = 0;
  const auto res = cmd_train(cfg, 1, std::nullopt);
  const auto ckpt = load_checkpoint(res.checkpoint_dir);
  const auto fresh = build_model<float>(cfg.model);
  for (const auto& [name, t] : fresh.named_tensors()) {
    INFO(name);
    REQUIRE(ckpt.find(name) != nullptr);
    CHECK(same(*ckpt.find(name), t));
  }
  const auto adapters = AdapterSet<float>::attach(classify_layers(fresh), cfg.adapter_rank, cfg.seed);
  for (const auto& [id, a] : adapters.adapters()) {
    CHECK(same(*ckpt.find("adapter." + id + ".B"), a.B));
    CHECK(same(*ckpt.find("adapter." + id + ".A"), a.A));
  }
  CHECK(res.report.steps == 0);
  CHECK(res.report.base_hash_before == res.report.base_hash_after);
  CHECK(res.report.initial_val == res.report.final_val);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(j.contains("final_val"));
  fs::remove_all(dir);
}

TEST_CASE("training freezes the base and stage 2 continues from stage 1") {
  const auto dir = scratch("stages");
  auto cfg = small_config(dir);
  const auto s1 = cmd_train(cfg, 1, std::nullopt);
  CHECK(s1.report.base_hash_before == s1.report.base_hash_after);
  CHECK(s1.report.curve.size() == cfg.train.stage1_steps);

  CHECK(catch_error([&] { cmd_train(cfg, 2, std::nullopt); }).category == ErrorCategory::Schedule);
  CHECK(catch_error([&] { cmd_train(cfg, 3, std::nullopt); }).category == ErrorCategory::Configuration);

  auto cfg2 = cfg;
  cfg2.out_dir = (dir / "stage2").string();
  const auto s2 = cmd_train(cfg2, 2, s1.checkpoint_dir);
  CHECK(s2.report.stage == 2);
  CHECK(std::fabs(s2.report.initial_val.abs_rel - s1.report.final_val.abs_rel) <= 1e-6);
  const auto ckpt = load_checkpoint(s2.checkpoint_dir);
  CHECK(ckpt.stage == 2);
  CHECK(ckpt.counters.at("stage2.steps") == cfg.train.stage2_steps);
  fs::remove_all(dir);
}

TEST_CASE("dump-depth writes one PGM per frame and reports unwritable targets") {
  const auto dir = scratch("dump");
  auto cfg = small_config(dir);
  cfg.train.stage1_steps = 1;
  const auto res = cmd_train(cfg, 1, std::nullopt);
  const auto n = cmd_dump_depth(cfg, dump_request(res.checkpoint_dir, dir / "png", true));
  CHECK(n == cfg.train.n_test);
  CHECK(fs::exists(dir / "png" / "frame_0000_depth.pgm"));
  const auto pair = read_pgm16(dir / "png" / "frame_0000_pair.pgm");
  CHECK(pair.width == 2 * cfg.model.width);
  std::ofstream(dir / "blocker") << "x";
  CHECK(catch_error([&] {
          cmd_dump_depth(cfg, dump_request(res.checkpoint_dir, dir / "blocker" / "sub", false));
        }).category == ErrorCategory::Io);
  fs::remove_all(dir);
}

TEST_CASE("ablation has three rows with growing parameter counts") {
  const auto dir = scratch("ablate");
  auto cfg = small_config(dir);
  cfg.train.stage1_steps = 1;
  const auto rows = cmd_ablate(cfg);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].subspaces == "mlp");
  CHECK(rows[0].trainable_params < rows[1].trainable_params);
  CHECK(rows[1].trainable_params < rows[2].trainable_params);
  const auto j = ablation_to_json(rows);
  CHECK(j["rows"].size() == 3);
  CHECK(ablation_table(rows).find("MLP") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("info reports the registry and memory ratio") {
  const auto j = cmd_info(RunConfig{});
  CHECK(j.contains("memory"));
  CHECK(j.dump().find("attn.qkv") != std::string::npos);
}

TEST_CASE("command line exit codes follow the error category") {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  const auto cfg_path = dir / "small.cfg";
  std::ofstream(cfg_path) << "model.height = 16\nmodel.width = 16\nscene.height = 16\nscene.width = 16\n"
                             "model.base_channels = 8\ntrain.n_train = 8\ntrain.n_val = 2\ntrain.n_test = 2\n"
                             "train.batch_size = 2\ntrain.stage1_steps = 1\n";
  std::ofstream(dir / "bad.cfg") << "model.nonsense = 1\n";
  const std::string common = "--config \"" + cfg_path.string() + "\" --out \"" + (dir / "run").string() + "\"";

  CHECK(run_cli("info") == 0);
  CHECK(run_cli("info --config \"" + (dir / "bad.cfg").string() + "\"") == exit_code(ErrorCategory::Configuration));
  CHECK(run_cli("train --stage 2 " + common) == exit_code(ErrorCategory::Schedule));
  CHECK(run_cli("eval --resume \"" + (dir / "missing").string() + "\" " + common) == exit_code(ErrorCategory::Format));
  CHECK(run_cli("report --baseline 0,1,1,1,1 --candidate 1,1,1,1,1") == exit_code(ErrorCategory::Report));
  CHECK(run_cli("report --baseline 0.052,0.362,4.464,0.073,0.979 --candidate 0.049,0.325,4.280,0.069,0.983") == 0);
  CHECK(run_cli("train --quiet " + common) == 0);
  CHECK(fs::exists(dir / "run" / "checkpoint" / "manifest.json"));
  CHECK(run_cli("eval --resume \"" + (dir / "run" / "checkpoint").string() + "\" " + common) == 0);
  CHECK(run_cli("no-such-command") != 0);
  fs::remove_all(dir);
}
