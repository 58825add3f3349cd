// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration. The on-disk form is flat text, one `section.key = value`
// per line, `#` starts a comment. Every key has a default, so an empty file is
// the default desk-scale experiment. `default_config_text()` lists all keys.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "depthadapt/metrics.hpp"
#include "depthadapt/model.hpp"
#include "depthadapt/scenes.hpp"
#include "depthadapt/stage2.hpp"

namespace depthadapt {

struct TrainConfig {
  std::size_t stage1_steps = 500;
  std::size_t stage2_steps = 200;
  double stage1_lr = 1e-3;
  std::size_t batch_size = 8;
  std::size_t log_interval = 25;
  double loss_lambda = 0.5;
  std::size_t n_train = 512;
  std::size_t n_val = 64;
  std::size_t n_test = 32;
};

struct RunConfig {
  ModelConfig model;
  SceneConfig scene;
  std::size_t adapter_rank = 4;
  std::string subspaces = "conv,mlp,attention";
  Stage2Options stage2;
  TrainConfig train;
  EvalConfig eval;
  std::uint64_t seed = 0;  // adapter init and batch order
  std::string out_dir = "runs/default";

  void validate() const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Throws a configuration error naming the offending key (and line).
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Sets one dotted key from its text form.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Every key in a fixed order, values formatted to round-trip exactly.
KeyValues config_to_kv(const RunConfig& cfg);
RunConfig config_from_kv(const std::map<std::string, std::string>& kv);

std::string default_config_text();

}  // namespace depthadapt
