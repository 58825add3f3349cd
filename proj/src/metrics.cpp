// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "depthadapt/errors.hpp"

namespace depthadapt {

void EvalConfig::validate() const {
  if (!(min_depth > 0.0) || !(min_depth < max_depth)) {
    fail(ErrorCategory::Configuration, "eval.min_depth must satisfy 0 < min_depth < max_depth");
  }
  if (!(delta_threshold > 1.0)) fail(ErrorCategory::Configuration, "eval.delta_threshold must exceed 1");
}

double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorCategory::Evaluation, "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::vector<double> median_scale(std::span<const double> pred, std::span<const double> gt,
                                 std::span<const std::uint8_t> mask) {
  if (pred.size() != gt.size() || (!mask.empty() && mask.size() != pred.size())) {
    fail(ErrorCategory::Dimension, "median_scale: prediction, ground truth and mask sizes differ");
  }
  std::vector<double> p, g;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    p.push_back(pred[i]);
    g.push_back(gt[i]);
  }
  if (p.empty()) fail(ErrorCategory::Evaluation, "median_scale: empty mask");
  for (double v : p) {
    if (!(v > 0.0)) fail(ErrorCategory::Evaluation, "median_scale: non-positive predicted depth in mask");
  }
  const double mp = median(std::move(p));
  const double s = median(std::move(g)) / mp;
  std::vector<double> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) out[i] = static_cast<double>(static_cast<float>(pred[i] * s));
  return out;
}

DepthMetrics compute_metrics(std::span<const double> pred, std::span<const double> gt, const EvalConfig& cfg) {
  cfg.validate();
  if (pred.size() != gt.size()) {
    fail(ErrorCategory::Dimension, "compute_metrics: " + std::to_string(pred.size()) + " predicted vs " +
                                       std::to_string(gt.size()) + " ground-truth pixels");
  }
  std::vector<std::uint8_t> mask(gt.size());
  std::size_t valid = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    mask[i] = std::isfinite(gt[i]) && gt[i] >= cfg.min_depth && gt[i] <= cfg.max_depth;
    valid += mask[i];
  }
  if (valid == 0) fail(ErrorCategory::Evaluation, "no ground-truth pixels inside the depth range");

  std::vector<double> scaled;
  std::span<const double> p = pred;
  if (cfg.scaling == Scaling::Median) {
    scaled = median_scale(pred, gt, mask);
    p = scaled;
  }

  double abs_rel = 0, sq_rel = 0, sq = 0, sq_log = 0;
  std::size_t within = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!mask[i]) continue;
    const double pi = std::clamp(p[i], cfg.min_depth, cfg.max_depth);
    const double gi = gt[i];
    const double diff = pi - gi;
    abs_rel += std::abs(diff) / gi;
    sq_rel += diff * diff / gi;
    sq += diff * diff;
    const double dl = std::log(pi) - std::log(gi);
    sq_log += dl * dl;
    if (std::max(pi / gi, gi / pi) < cfg.delta_threshold) ++within;
  }
  const double n = static_cast<double>(valid);
  return {abs_rel / n, sq_rel / n, std::sqrt(sq / n), std::sqrt(sq_log / n), static_cast<double>(within) / n};
}

DepthMetrics aggregate(std::span<const DepthMetrics> per_frame) {
  if (per_frame.empty()) fail(ErrorCategory::Evaluation, "aggregate of zero frames");
  const double n = static_cast<double>(per_frame.size());
  // Sorted summation makes the mean independent of frame order.
  auto field_mean = [&](double DepthMetrics::*field) {
    std::vector<double> v;
    v.reserve(per_frame.size());
    for (const auto& m : per_frame) v.push_back(m.*field);
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s / n;
  };
  return {field_mean(&DepthMetrics::abs_rel), field_mean(&DepthMetrics::sq_rel), field_mean(&DepthMetrics::rmse),
          field_mean(&DepthMetrics::rmse_log), field_mean(&DepthMetrics::delta)};
}

nlohmann::json to_json(const DepthMetrics& m, int decimals) {
  const double f = std::pow(10.0, decimals);
  auto r = [f](double x) { return std::nearbyint(x * f) / f; };
  return {{"abs_rel", r(m.abs_rel)}, {"sq_rel", r(m.sq_rel)}, {"rmse", r(m.rmse)}, {"rmse_log", r(m.rmse_log)},
          {"delta", r(m.delta)}};
}

DepthMetrics metrics_from_json(const nlohmann::json& j) {
  try {
    return {j.at("abs_rel").get<double>(), j.at("sq_rel").get<double>(), j.at("rmse").get<double>(),
            j.at("rmse_log").get<double>(), j.at("delta").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::Format, std::string("metrics JSON: ") + e.what());
  }
}

}  // namespace depthadapt
