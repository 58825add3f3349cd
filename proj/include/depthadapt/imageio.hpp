// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace depthadapt {

struct Gray16 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint16_t> pixels;
};

struct Rgb8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB
};

/// "P5\n<W> <H>\n65535\n" followed by big-endian 16-bit samples.
std::vector<std::uint8_t> encode_pgm16(const Gray16& image);
void write_pgm16(const std::filesystem::path& path, const Gray16& image);
Gray16 read_pgm16(const std::filesystem::path& path);

void write_ppm(const std::filesystem::path& path, const Rgb8& image);
Rgb8 read_ppm(const std::filesystem::path& path);

/// Linear map of [lo, hi] onto [0, 65535], clamped and rounded.
Gray16 depth_to_gray16(std::span<const float> depth, std::size_t width, std::size_t height, double lo, double hi);

}  // namespace depthadapt
