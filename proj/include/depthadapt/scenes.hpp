// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Procedural endoscope-like scenes: looking down a curved tube.
//
// With pixel centres (u, v) in [-1, 1]^2 and per-scene parameters drawn from
// (seed, index) -- lumen centre c0, radius R, curvature k, bend angle theta:
//
//   d     = (u, v) - c0
//   rho   = | d - k * exp(-|d|^2 / 0.125) * (cos theta, sin theta) |
//   t     = 1 / (1 + rho / R)                        in (0, 1]
//   depth = d_min + (d_max - d_min) * t
//
// t falls off like 1/rho, the image-space profile of a cylinder wall, and the
// exponential term bends the deep end of the lumen. Colour is a tinted albedo
// texture times Lambertian shading of the depth gradient (light at the camera),
// times inverse-square falloff 1 / (1 + (depth / L)^2), times a vignette.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "depthadapt/tensor.hpp"

namespace depthadapt {

struct SceneConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  double d_min = 0.1;
  double d_max = 15.0;
  double radius_min = 0.08;
  double radius_max = 0.3;
  double curvature_min = 0.0;
  double curvature_max = 0.4;
  double light_falloff = 2.0;
  std::uint64_t seed = 1234;

  void validate() const;
};

struct Scene {
  Tensor<float> rgb;    // 3 x H x W, values in [0, 1]
  Tensor<float> depth;  // H x W, values in [d_min, d_max]
};

Scene generate_scene(const SceneConfig& cfg, std::uint64_t index);

/// Indexed view over frames: either generated scenes or frames loaded from disk.
class Dataset {
 public:
  Dataset() = default;
  Dataset(SceneConfig cfg, std::vector<std::uint64_t> indices);
  static Dataset from_frames(std::vector<Scene> frames);

  std::size_t size() const { return frames_.empty() ? indices_.size() : frames_.size(); }
  const std::vector<std::uint64_t>& indices() const { return indices_; }
  Scene get(std::size_t i) const;
  std::size_t height() const;
  std::size_t width() const;

 private:
  SceneConfig cfg_;
  std::vector<std::uint64_t> indices_;
  std::vector<Scene> frames_;
};

struct Split {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Consecutive, disjoint index ranges: train [0, n_train), then val, then test.
Split make_split(const SceneConfig& cfg, std::size_t n_train = 512, std::size_t n_val = 64, std::size_t n_test = 32);

/// Writes frame_XXXX_rgb.ppm (P6), frame_XXXX_depth.pgm (P5, 16-bit) and
/// manifest.json with the depth scale factor (depth = value * scale).
void dump_dataset(const Dataset& data, double depth_scale, const std::filesystem::path& dir);

/// Reads a directory written by dump_dataset (or laid out the same way).
Dataset load_dataset_dir(const std::filesystem::path& dir);

}  // namespace depthadapt
