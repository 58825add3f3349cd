// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/imageio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "depthadapt/errors.hpp"

namespace depthadapt {

namespace {

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCategory::Io, "short write to " + path.string());
}

struct Header {
  std::string magic;
  std::size_t width = 0, height = 0, maxval = 0;
  std::size_t offset = 0;
};

// Netpbm header: magic, width, height, maxval separated by whitespace and
// optional comments, then exactly one whitespace byte before the raster.
Header parse_header(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  Header h;
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok += static_cast<char>(bytes[pos++]);
    if (tok.empty()) fail(ErrorCategory::Format, "truncated header in " + path.string());
    return tok;
  };
  try {
    h.magic = next_token();
    h.width = std::stoul(next_token());
    h.height = std::stoul(next_token());
    h.maxval = std::stoul(next_token());
  } catch (const std::logic_error&) {
    fail(ErrorCategory::Format, "malformed header in " + path.string());
  }
  h.offset = pos + 1;
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_pgm16(const Gray16& image) {
  const std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n65535\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + image.pixels.size() * 2);
  for (auto v : image.pixels) {
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return bytes;
}

void write_pgm16(const std::filesystem::path& path, const Gray16& image) { write_all(path, encode_pgm16(image)); }

Gray16 read_pgm16(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const auto h = parse_header(bytes, path);
  if (h.magic != "P5") fail(ErrorCategory::Format, path.string() + " is not a binary PGM");
  const std::size_t sample = h.maxval > 255 ? 2 : 1;
  const std::size_t n = h.width * h.height;
  if (bytes.size() < h.offset + n * sample) fail(ErrorCategory::Format, "truncated raster in " + path.string());
  Gray16 img{h.width, h.height, std::vector<std::uint16_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    img.pixels[i] = sample == 2 ? static_cast<std::uint16_t>((bytes[h.offset + 2 * i] << 8) | bytes[h.offset + 2 * i + 1])
                                : bytes[h.offset + i];
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const Rgb8& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
  write_all(path, bytes);
}

Rgb8 read_ppm(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const auto h = parse_header(bytes, path);
  if (h.magic != "P6" || h.maxval != 255) fail(ErrorCategory::Format, path.string() + " is not an 8-bit binary PPM");
  const std::size_t n = h.width * h.height * 3;
  if (bytes.size() < h.offset + n) fail(ErrorCategory::Format, "truncated raster in " + path.string());
  return {h.width, h.height, std::vector<std::uint8_t>(bytes.begin() + h.offset, bytes.begin() + h.offset + n)};
}

Gray16 depth_to_gray16(std::span<const float> depth, std::size_t width, std::size_t height, double lo, double hi) {
  if (depth.size() != width * height) fail(ErrorCategory::Dimension, "depth map size does not match width x height");
  if (!(hi > lo)) fail(ErrorCategory::Configuration, "depth normalization range is empty");
  Gray16 img{width, height, std::vector<std::uint16_t>(depth.size())};
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double t = std::clamp((static_cast<double>(depth[i]) - lo) / (hi - lo), 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint16_t>(std::lround(t * 65535.0));
  }
  return img;
}

}  // namespace depthadapt
