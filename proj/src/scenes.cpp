// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "json.hpp"

#include "depthadapt/errors.hpp"
#include "depthadapt/imageio.hpp"

namespace depthadapt {

void SceneConfig::validate() const {
  if (height < 16 || width < 16) {
    fail(ErrorCategory::Configuration, "scene.height/scene.width must be at least 16, got " + std::to_string(height) +
                                           "x" + std::to_string(width));
  }
  if (!(d_min > 0.0) || !(d_min < d_max) || !std::isfinite(d_max)) {
    fail(ErrorCategory::Configuration, "scene.d_min must satisfy 0 < d_min < d_max");
  }
  if (!(radius_min > 0.0) || radius_max < radius_min) {
    fail(ErrorCategory::Configuration, "scene.radius_min/radius_max must satisfy 0 < min <= max");
  }
  if (curvature_min < 0.0 || curvature_max < curvature_min) {
    fail(ErrorCategory::Configuration, "scene.curvature_min/curvature_max must satisfy 0 <= min <= max");
  }
  if (!(light_falloff > 0.0)) fail(ErrorCategory::Configuration, "scene.light_falloff must be positive");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg, std::uint64_t index) {
  cfg.validate();
  std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(index)));
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const double cx = uniform(-0.25, 0.25);
  const double cy = uniform(-0.25, 0.25);
  const double radius = uniform(cfg.radius_min, cfg.radius_max);
  const double curvature = uniform(cfg.curvature_min, cfg.curvature_max);
  const double theta = uniform(0.0, 2.0 * std::numbers::pi);
  const double tint[3] = {uniform(0.8, 1.0), uniform(0.35, 0.55), uniform(0.3, 0.5)};
  const double fu = uniform(4.0, 12.0), fv = uniform(4.0, 12.0);
  const double pu = uniform(0.0, 2.0 * std::numbers::pi), pv = uniform(0.0, 2.0 * std::numbers::pi);

  const std::size_t h = cfg.height, w = cfg.width;
  auto coord = [](std::size_t i, std::size_t n) { return (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n) - 1.0; };

  std::vector<double> z(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = coord(x, w) - cx, dy = coord(y, h) - cy;
      const double bend = curvature * std::exp(-(dx * dx + dy * dy) / 0.125);
      const double rho = std::hypot(dx - bend * std::cos(theta), dy - bend * std::sin(theta));
      const double t = 1.0 / (1.0 + rho / radius);
      z[y * w + x] = cfg.d_min + (cfg.d_max - cfg.d_min) * t;
    }
  }

  std::vector<float> depth(h * w);
  std::vector<float> rgb(3 * h * w);
  const double du = 2.0 / static_cast<double>(w), dv = 2.0 / static_cast<double>(h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t x0 = x == 0 ? 0 : x - 1, x1 = x + 1 == w ? x : x + 1;
      const std::size_t y0 = y == 0 ? 0 : y - 1, y1 = y + 1 == h ? y : y + 1;
      const double zc = z[y * w + x];
      const double gx = (z[y * w + x1] - z[y * w + x0]) / (static_cast<double>(x1 - x0) * du);
      const double gy = (z[y1 * w + x] - z[y0 * w + x]) / (static_cast<double>(y1 - y0) * dv);
      const double slope = 0.5 * std::hypot(gx, gy) / zc;
      const double shade = 1.0 / std::sqrt(1.0 + slope * slope);
      const double falloff = 1.0 / (1.0 + (zc / cfg.light_falloff) * (zc / cfg.light_falloff));
      const double u = coord(x, w), v = coord(y, h);
      const double vignette = 1.0 - 0.35 * (u * u + v * v) / 2.0;
      const double texture = 0.9 + 0.1 * std::sin(fu * u + pu) * std::sin(fv * v + pv);
      for (std::size_t c = 0; c < 3; ++c) {
        const double value = 1.2 * tint[c] * texture * shade * falloff * vignette;
        rgb[(c * h + y) * w + x] = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
      depth[y * w + x] = std::clamp(static_cast<float>(zc), static_cast<float>(cfg.d_min), static_cast<float>(cfg.d_max));
    }
  }
  return {Tensor<float>::from(Shape{3, h, w}, std::move(rgb)), Tensor<float>::from(Shape{h, w}, std::move(depth))};
}

Dataset::Dataset(SceneConfig cfg, std::vector<std::uint64_t> indices) : cfg_(cfg), indices_(std::move(indices)) {
  cfg_.validate();
}

Dataset Dataset::from_frames(std::vector<Scene> frames) {
  if (frames.empty()) fail(ErrorCategory::Evaluation, "dataset has no frames");
  const auto& first = frames.front().depth.shape();
  for (const auto& f : frames) {
    if (f.depth.shape() != first || f.rgb.rank() != 3 || f.rgb.dim(0) != 3 || f.rgb.dim(1) != first[0] ||
        f.rgb.dim(2) != first[1]) {
      fail(ErrorCategory::Dimension, "frames must share one 3 x H x W / H x W geometry");
    }
  }
  Dataset d;
  d.cfg_.height = first[0];
  d.cfg_.width = first[1];
  d.frames_ = std::move(frames);
  return d;
}

Scene Dataset::get(std::size_t i) const {
  if (i >= size()) fail(ErrorCategory::Contract, "dataset index " + std::to_string(i) + " out of range");
  if (!frames_.empty()) return frames_[i];
  return generate_scene(cfg_, indices_[i]);
}

std::size_t Dataset::height() const { return cfg_.height; }
std::size_t Dataset::width() const { return cfg_.width; }

Split make_split(const SceneConfig& cfg, std::size_t n_train, std::size_t n_val, std::size_t n_test) {
  if (n_train == 0 || n_val == 0 || n_test == 0) {
    fail(ErrorCategory::Configuration, "split sizes must all be at least 1");
  }
  auto range = [](std::uint64_t begin, std::size_t n) {
    std::vector<std::uint64_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = begin + i;
    return out;
  };
  return {Dataset(cfg, range(0, n_train)), Dataset(cfg, range(n_train, n_val)),
          Dataset(cfg, range(n_train + n_val, n_test))};
}

namespace {

std::string frame_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu", i);
  return buf;
}

}  // namespace

void dump_dataset(const Dataset& data, double depth_scale, const std::filesystem::path& dir) {
  if (!(depth_scale > 0.0)) fail(ErrorCategory::Configuration, "depth scale must be positive");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCategory::Io, "cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json manifest;
  manifest["width"] = data.width();
  manifest["height"] = data.height();
  manifest["depth_scale"] = depth_scale;
  manifest["frames"] = nlohmann::json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto scene = data.get(i);
    const std::size_t h = data.height(), w = data.width();
    Rgb8 rgb{w, h, std::vector<std::uint8_t>(3 * h * w)};
    const auto src = scene.rgb.data();
    for (std::size_t p = 0; p < h * w; ++p)
      for (std::size_t c = 0; c < 3; ++c)
        rgb.pixels[3 * p + c] = static_cast<std::uint8_t>(std::lround(std::clamp(src[c * h * w + p], 0.0f, 1.0f) * 255.0f));
    Gray16 gray{w, h, std::vector<std::uint16_t>(h * w)};
    const auto d = scene.depth.data();
    for (std::size_t p = 0; p < h * w; ++p)
      gray.pixels[p] = static_cast<std::uint16_t>(std::clamp(std::lround(d[p] / depth_scale), 0L, 65535L));
    const auto stem = frame_stem(i);
    write_ppm(dir / (stem + "_rgb.ppm"), rgb);
    write_pgm16(dir / (stem + "_depth.pgm"), gray);
    manifest["frames"].push_back({{"rgb", stem + "_rgb.ppm"}, {"depth", stem + "_depth.pgm"}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) fail(ErrorCategory::Io, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset_dir(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::Io, "cannot open " + path.string());
  nlohmann::json manifest;
  double scale = 0.0;
  std::vector<std::pair<std::string, std::string>> entries;
  try {
    manifest = nlohmann::json::parse(in);
    scale = manifest.at("depth_scale").get<double>();
    for (const auto& f : manifest.at("frames")) {
      entries.emplace_back(f.at("rgb").get<std::string>(), f.at("depth").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::Format, path.string() + ": " + e.what());
  }
  if (!(scale > 0.0)) fail(ErrorCategory::Format, path.string() + ": depth_scale must be positive");

  std::vector<Scene> frames;
  for (const auto& [rgb_name, depth_name] : entries) {
    const auto rgb = read_ppm(dir / rgb_name);
    const auto gray = read_pgm16(dir / depth_name);
    if (rgb.width != gray.width || rgb.height != gray.height) {
      fail(ErrorCategory::Format, rgb_name + " and " + depth_name + " differ in size");
    }
    const std::size_t h = gray.height, w = gray.width;
    std::vector<float> planar(3 * h * w);
    for (std::size_t p = 0; p < h * w; ++p)
      for (std::size_t c = 0; c < 3; ++c) planar[c * h * w + p] = static_cast<float>(rgb.pixels[3 * p + c]) / 255.0f;
    std::vector<float> depth(h * w);
    for (std::size_t p = 0; p < h * w; ++p) depth[p] = static_cast<float>(gray.pixels[p] * scale);
    frames.push_back({Tensor<float>::from(Shape{3, h, w}, std::move(planar)),
                      Tensor<float>::from(Shape{h, w}, std::move(depth))});
  }
  return Dataset::from_frames(std::move(frames));
}

}  // namespace depthadapt
