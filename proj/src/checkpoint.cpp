// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "depthadapt/errors.hpp"
#include "depthadapt/hash.hpp"
#include "json.hpp"

namespace depthadapt {

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::Format, "checkpoint file missing or unreadable: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::Io, "cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) fail(ErrorCategory::Io, "short write to " + path.string());
}

}  // namespace

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCategory::Io, "cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["stage"] = ckpt.stage;
  manifest["config"] = ckpt.config;
  manifest["counters"] = ckpt.counters;
  manifest["tensors"] = nlohmann::json::array();

  std::vector<unsigned char> blob;
  for (const auto& [name, tensor] : ckpt.tensors) {
    const auto values = tensor.data();
    const std::size_t offset = blob.size();
    for (float v : values) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) blob.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    }
    manifest["tensors"].push_back(
        {{"name", name}, {"shape", tensor.shape()}, {"offset", offset}, {"length", blob.size() - offset}});
  }
  const std::string text = manifest.dump(2) + "\n";
  write_bytes(dir / "manifest.json", text.data(), text.size());
  write_bytes(dir / "tensors.bin", blob.data(), blob.size());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  const auto manifest_bytes = read_bytes(manifest_path);
  const auto blob = read_bytes(dir / "tensors.bin");
  const std::string where = manifest_path.string() + ": ";

  Checkpoint ckpt;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_bytes.begin(), manifest_bytes.end());
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      fail(ErrorCategory::Format, where + "unsupported format_version " + std::to_string(version));
    }
    ckpt.stage = manifest.at("stage").get<int>();
    ckpt.config = manifest.at("config").get<std::map<std::string, std::string>>();
    ckpt.counters = manifest.at("counters").get<std::map<std::string, std::uint64_t>>();

    std::size_t expected_offset = 0;
    for (const auto& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto length = entry.at("length").get<std::size_t>();
      if (offset != expected_offset) {
        fail(ErrorCategory::Format, where + "tensor '" + name + "' starts at byte " + std::to_string(offset) +
                                        ", expected " + std::to_string(expected_offset));
      }
      if (shape.empty() || length != shape_numel(shape) * 4) {
        fail(ErrorCategory::Format, where + "tensor '" + name + "' has length " + std::to_string(length) +
                                        " but shape " + shape_str(shape));
      }
      if (offset + length > blob.size()) {
        fail(ErrorCategory::Format, where + "tensor '" + name + "' runs past the end of tensors.bin (" +
                                        std::to_string(blob.size()) + " bytes)");
      }
      std::vector<float> values(length / 4);
      for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(blob[offset + 4 * i + b]) << (8 * b);
        values[i] = std::bit_cast<float>(bits);
      }
      ckpt.tensors.emplace_back(name, Tensor<float>::from(shape, std::move(values)));
      expected_offset = offset + length;
    }
    if (expected_offset != blob.size()) {
      fail(ErrorCategory::Format, where + "tensor directory covers " + std::to_string(expected_offset) +
                                      " bytes but tensors.bin has " + std::to_string(blob.size()));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::Format, where + e.what());
  }
  return ckpt;
}

std::uint64_t checkpoint_hash(const std::filesystem::path& dir) {
  const auto manifest = read_bytes(dir / "manifest.json");
  const auto blob = read_bytes(dir / "tensors.bin");
  return fnv1a64(blob, fnv1a64(manifest));
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace depthadapt
