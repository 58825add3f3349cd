// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// A checkpoint is a directory with two files:
//
//   manifest.json  format_version, stage, config snapshot, step counters and
//                  the tensor directory [{name, shape, offset, length}]
//   tensors.bin    little-endian float32 values of every tensor, concatenated
//                  in directory order; offsets and lengths are in bytes
//
// Writing is deterministic: equal contents give byte-identical files.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "depthadapt/tensor.hpp"

namespace depthadapt {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  int stage = 1;
  std::map<std::string, std::string> config;
  std::map<std::string, std::uint64_t> counters;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);

/// Format errors describe what in the manifest or blob is inconsistent.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// FNV-1a over manifest.json followed by tensors.bin.
std::uint64_t checkpoint_hash(const std::filesystem::path& dir);

std::string hex64(std::uint64_t value);

}  // namespace depthadapt
