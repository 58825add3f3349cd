// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "depthadapt/errors.hpp"
#include "depthadapt/subspace.hpp"

namespace depthadapt {

namespace {

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename U>
U parse_unsigned(const std::string& key, const std::string& text) {
  U v{};
  const auto* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) {
    fail(ErrorCategory::Configuration, key + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (text.empty() || used != text.size()) {
    fail(ErrorCategory::Configuration, key + ": expected a number, got '" + text + "'");
  }
  return v;
}

Field uint_field(std::string key, std::function<std::size_t&(RunConfig&)> ref) {
  return {key, [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
          [ref, key](RunConfig& c, const std::string& s) { ref(c) = parse_unsigned<std::size_t>(key, s); }};
}

Field seed_field(std::string key, std::function<std::uint64_t&(RunConfig&)> ref) {
  return {key, [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
          [ref, key](RunConfig& c, const std::string& s) { ref(c) = parse_unsigned<std::uint64_t>(key, s); }};
}

Field real_field(std::string key, std::function<double&(RunConfig&)> ref) {
  return {key, [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); },
          [ref, key](RunConfig& c, const std::string& s) { ref(c) = parse_double(key, s); }};
}

Field text_field(std::string key, std::function<std::string&(RunConfig&)> ref) {
  return {key, [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); },
          [ref](RunConfig& c, const std::string& s) { ref(c) = s; }};
}

#define U_FIELD(key, member) uint_field(key, [](RunConfig& c) -> std::size_t& { return c.member; })
#define R_FIELD(key, member) real_field(key, [](RunConfig& c) -> double& { return c.member; })
#define S_FIELD(key, member) seed_field(key, [](RunConfig& c) -> std::uint64_t& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      U_FIELD("model.height", model.height),
      U_FIELD("model.width", model.width),
      U_FIELD("model.base_channels", model.base_channels),
      U_FIELD("model.attention_heads", model.attention_heads),
      U_FIELD("model.mlp_hidden", model.mlp_hidden),
      U_FIELD("model.mlp_layers", model.mlp_layers),
      R_FIELD("model.min_depth", model.min_depth),
      R_FIELD("model.max_depth", model.max_depth),
      S_FIELD("model.seed", model.seed),
      U_FIELD("scene.height", scene.height),
      U_FIELD("scene.width", scene.width),
      R_FIELD("scene.d_min", scene.d_min),
      R_FIELD("scene.d_max", scene.d_max),
      R_FIELD("scene.radius_min", scene.radius_min),
      R_FIELD("scene.radius_max", scene.radius_max),
      R_FIELD("scene.curvature_min", scene.curvature_min),
      R_FIELD("scene.curvature_max", scene.curvature_max),
      R_FIELD("scene.light_falloff", scene.light_falloff),
      S_FIELD("scene.seed", scene.seed),
      U_FIELD("adapter.rank", adapter_rank),
      text_field("adapter.subspaces", [](RunConfig& c) -> std::string& { return c.subspaces; }),
      U_FIELD("stage2.rank", stage2.rank),
      U_FIELD("stage2.refresh_period", stage2.refresh_period),
      R_FIELD("stage2.lr", stage2.lr),
      R_FIELD("stage2.correction_scale", stage2.correction_scale),
      R_FIELD("stage2.beta1", stage2.beta1),
      R_FIELD("stage2.beta2", stage2.beta2),
      R_FIELD("stage2.eps", stage2.eps),
      U_FIELD("train.stage1_steps", train.stage1_steps),
      U_FIELD("train.stage2_steps", train.stage2_steps),
      R_FIELD("train.stage1_lr", train.stage1_lr),
      U_FIELD("train.batch_size", train.batch_size),
      U_FIELD("train.log_interval", train.log_interval),
      R_FIELD("train.loss_lambda", train.loss_lambda),
      U_FIELD("train.n_train", train.n_train),
      U_FIELD("train.n_val", train.n_val),
      U_FIELD("train.n_test", train.n_test),
      R_FIELD("eval.min_depth", eval.min_depth),
      R_FIELD("eval.max_depth", eval.max_depth),
      R_FIELD("eval.delta_threshold", eval.delta_threshold),
      {"eval.scaling",
       [](const RunConfig& c) { return std::string(c.eval.scaling == Scaling::Median ? "median" : "none"); },
       [](RunConfig& c, const std::string& s) {
         if (s == "median") {
           c.eval.scaling = Scaling::Median;
         } else if (s == "none") {
           c.eval.scaling = Scaling::None;
         } else {
           fail(ErrorCategory::Configuration, "eval.scaling: expected 'median' or 'none', got '" + s + "'");
         }
       }},
      S_FIELD("run.seed", seed),
      text_field("run.out_dir", [](RunConfig& c) -> std::string& { return c.out_dir; }),
  };
  return table;
}

#undef U_FIELD
#undef R_FIELD
#undef S_FIELD

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  scene.validate();
  eval.validate();
  if (model.height != scene.height || model.width != scene.width) {
    fail(ErrorCategory::Configuration, "scene.height/scene.width must match model.height/model.width");
  }
  if (adapter_rank == 0) fail(ErrorCategory::Configuration, "adapter.rank must be at least 1");
  try {
    parse_kinds(subspaces);
  } catch (const Error& e) {
    fail(ErrorCategory::Configuration, "adapter.subspaces: " + e.detail());
  }
  if (stage2.rank == 0) fail(ErrorCategory::Configuration, "stage2.rank must be at least 1");
  if (stage2.refresh_period == 0) fail(ErrorCategory::Configuration, "stage2.refresh_period must be at least 1");
  if (!(stage2.lr > 0.0)) fail(ErrorCategory::Configuration, "stage2.lr must be positive");
  if (!(train.stage1_lr > 0.0)) fail(ErrorCategory::Configuration, "train.stage1_lr must be positive");
  if (train.batch_size == 0) fail(ErrorCategory::Configuration, "train.batch_size must be at least 1");
  if (train.log_interval == 0) fail(ErrorCategory::Configuration, "train.log_interval must be at least 1");
  if (train.n_train == 0 || train.n_val == 0 || train.n_test == 0) {
    fail(ErrorCategory::Configuration, "train.n_train/n_val/n_test must be at least 1");
  }
  if (out_dir.empty()) fail(ErrorCategory::Configuration, "run.out_dir must not be empty");
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  }
  fail(ErrorCategory::Configuration, key + ": unknown key");
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCategory::Configuration, "line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    try {
      set_config_value(cfg, key, trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.category(), "line " + std::to_string(lineno) + ": " + e.detail());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

KeyValues config_to_kv(const RunConfig& cfg) {
  KeyValues out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

RunConfig config_from_kv(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  for (const auto& [k, v] : kv) set_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

std::string default_config_text() {
  std::string out;
  for (const auto& [k, v] : config_to_kv(RunConfig{})) out += k + " = " + v + "\n";
  return out;
}

}  // namespace depthadapt
