// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Standard monocular depth metrics with median scaling and range capping.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace depthadapt {

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta = 1.0;

  bool operator==(const DepthMetrics&) const = default;
};

enum class Scaling { Median, None };

struct EvalConfig {
  double min_depth = 0.1;
  double max_depth = 150.0;
  double delta_threshold = 1.25;
  Scaling scaling = Scaling::Median;

  void validate() const;
};

/// Median of the values; an even count averages the two central values.
double median(std::vector<double> values);

/// pred * median(gt[mask]) / median(pred[mask]) for every pixel. An empty
/// mask selects all pixels. Scaled depths are rounded to single precision,
/// the precision depth maps are produced at, so that a global rescale of
/// pred leaves the result bitwise unchanged.
std::vector<double> median_scale(std::span<const double> pred, std::span<const double> gt,
                                 std::span<const std::uint8_t> mask = {});

/// Metrics over pixels whose ground truth lies in [min_depth, max_depth].
/// Predictions are median scaled (optional) and then clamped to the range.
DepthMetrics compute_metrics(std::span<const double> pred, std::span<const double> gt, const EvalConfig& cfg);

/// Unweighted per-field mean.
DepthMetrics aggregate(std::span<const DepthMetrics> per_frame);

/// {"abs_rel", "sq_rel", "rmse", "rmse_log", "delta"}, rounded to `decimals`.
nlohmann::json to_json(const DepthMetrics& m, int decimals = 5);
DepthMetrics metrics_from_json(const nlohmann::json& j);

}  // namespace depthadapt
