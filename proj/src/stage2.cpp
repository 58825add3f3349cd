// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/stage2.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "depthadapt/errors.hpp"
#include "depthadapt/kernels.hpp"
#include "depthadapt/ops.hpp"

namespace depthadapt {

template <typename T>
Tensor<T> full_param_direction(const Tensor<T>& base_weight, const GradientMap<T>& grads) {
  const auto* g = grads.find(base_weight);
  if (!g) fail(ErrorCategory::State, "no gradient entry for base weight " + std::to_string(base_weight.id()));
  std::vector<T> out(g->numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -g->at(i);
  return Tensor<T>::from(g->shape(), std::move(out));
}

template <typename T>
Tensor<T> compose(const Tensor<T>& w_stage1, const Tensor<T>& direction, T alpha, T beta) {
  if (w_stage1.shape() != direction.shape()) {
    fail(ErrorCategory::Dimension,
         "compose: " + shape_str(w_stage1.shape()) + " vs direction " + shape_str(direction.shape()));
  }
  std::vector<T> out(w_stage1.numel());
  const auto w = w_stage1.data();
  const auto d = direction.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * w[i] + beta * d[i];
  return Tensor<T>::from(w_stage1.shape(), std::move(out));
}

template <typename T>
Tensor<T> compose(const Tensor<T>& w_stage1, const Tensor<T>& direction, const Tensor<T>& alpha,
                  const Tensor<T>& beta) {
  if (w_stage1.shape() != direction.shape()) {
    fail(ErrorCategory::Dimension,
         "compose: " + shape_str(w_stage1.shape()) + " vs direction " + shape_str(direction.shape()));
  }
  if (alpha.numel() != 1 || beta.numel() != 1) fail(ErrorCategory::Dimension, "compose: alpha and beta are scalars");
  return add(mul(w_stage1, alpha), mul(direction, beta));
}

template <typename T>
Tensor<T> project_gradient(const Tensor<T>& grad, const Tensor<T>& projector) {
  return matmul(transpose(projector), grad).detach();
}

template <typename T>
Tensor<T> reconstruct(const Tensor<T>& projector, const Tensor<T>& projected) {
  return matmul(projector, projected).detach();
}

template <typename T>
Tensor<T> refresh_projector(const Tensor<T>& grad, std::size_t rank, const Tensor<T>* previous) {
  if (grad.rank() != 2) fail(ErrorCategory::Dimension, "refresh_projector: gradient must be a matrix");
  const std::size_t m = grad.dim(0), n = grad.dim(1);
  if (rank == 0 || rank > std::min(m, n)) {
    fail(ErrorCategory::Rank, "refresh_projector: rank " + std::to_string(rank) + " invalid for " +
                                  shape_str(grad.shape()));
  }
  bool zero = true;
  for (auto v : grad.data()) {
    if (!std::isfinite(static_cast<double>(v))) fail(ErrorCategory::Domain, "refresh_projector: non-finite gradient");
    zero = zero && v == T(0);
  }
  if (zero) {
    if (previous) return *previous;
    std::vector<T> eye(m * rank, T(0));
    for (std::size_t j = 0; j < rank; ++j) eye[j * rank + j] = T(1);
    return Tensor<T>::from(Shape{m, rank}, std::move(eye));
  }

  Eigen::MatrixXd g(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) g(i, j) = static_cast<double>(grad.at(i * n + j));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinU);
  const Eigen::MatrixXd& u = svd.matrixU();

  std::vector<T> out(m * rank);
  for (std::size_t j = 0; j < rank; ++j) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (std::abs(u(i, j)) > std::abs(u(arg, j))) arg = i;
    const double sign = u(arg, j) < 0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < m; ++i) out[i * rank + j] = static_cast<T>(sign * u(i, j));
  }
  return Tensor<T>::from(Shape{m, rank}, std::move(out));
}

template <typename T>
Stage2Set<T> Stage2Set<T>::init(const SubspaceRegistry<T>& selection, const Stage2Options& options) {
  if (options.rank == 0) fail(ErrorCategory::Configuration, "stage2.rank must be positive");
  if (options.refresh_period == 0) fail(ErrorCategory::Configuration, "stage2.refresh_period must be positive");
  Stage2Set set;
  set.registry_ = selection;
  set.options_ = options;
  for (const auto* d : selection.layers()) {
    if (options.rank > std::min(d->rows, d->cols)) {
      fail(ErrorCategory::Rank, "stage-2 rank " + std::to_string(options.rank) + " exceeds min(m, n) of layer '" +
                                    d->layer_id + "'");
    }
    Tensor<T> base = d->weight;
    base.set_requires_grad(true);
    Stage2State<T> s;
    s.layer_id = d->layer_id;
    s.alpha = Tensor<T>::scalar(T(1), true);
    s.beta = Tensor<T>::scalar(T(0), true);
    s.projector = refresh_projector(Tensor<T>::zeros(Shape{d->rows, d->cols}), options.rank);
    s.accumulator = Tensor<T>::zeros(Shape{options.rank, d->cols});
    s.second_moment = Tensor<T>::zeros(Shape{options.rank, d->cols});
    s.refresh_period = options.refresh_period;
    set.states_.emplace(d->layer_id, std::move(s));
  }
  return set;
}

template <typename T>
Tensor<T> Stage2Set<T>::correction(const Stage2State<T>& s) const {
  const std::size_t m = s.projector.dim(0);
  const std::size_t n = s.accumulator.dim(1);
  if (s.step_counter == 0) return Tensor<T>::zeros(Shape{m, n});
  const double t = static_cast<double>(s.step_counter);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  std::vector<T> normalized(s.accumulator.numel());
  const auto mom = s.accumulator.data();
  const auto var = s.second_moment.data();
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const double mh = static_cast<double>(mom[i]) / c1;
    const double vh = static_cast<double>(var[i]) / c2;
    normalized[i] = static_cast<T>(options_.correction_scale * mh / (std::sqrt(vh) + options_.eps));
  }
  return reconstruct(s.projector, Tensor<T>::from(s.accumulator.shape(), std::move(normalized)));
}

template <typename T>
Tensor<T> Stage2Set<T>::resolve(const WeightSlot<T>& slot) const {
  auto it = states_.find(slot.layer_id);
  if (it == states_.end()) return slot.weight;
  const auto& s = it->second;
  return compose(slot.weight, correction(s), s.alpha, s.beta);
}

template <typename T>
void Stage2Set<T>::update(const GradientMap<T>& grads) {
  // alpha/beta first: their gradients belong to the weights used in this pass.
  for (auto& [id, s] : states_) {
    for (auto* scalar : {&s.alpha, &s.beta}) {
      if (const auto* g = grads.find(*scalar)) {
        auto v = scalar->mutable_data();
        v[0] = static_cast<T>(static_cast<double>(v[0]) - options_.lr * static_cast<double>(g->item()));
      }
    }
  }
  for (const auto* d : registry_.layers()) {
    auto& s = states_.at(d->layer_id);
    const auto direction = full_param_direction(d->weight, grads);
    if (s.step_counter % s.refresh_period == 0) s.projector = refresh_projector(direction, options_.rank, &s.projector);
    const auto projected = project_gradient(direction, s.projector);
    auto mom = s.accumulator.mutable_data();
    auto var = s.second_moment.mutable_data();
    const auto p = projected.data();
    const T b1 = static_cast<T>(options_.beta1), b2 = static_cast<T>(options_.beta2);
    for (std::size_t i = 0; i < p.size(); ++i) {
      mom[i] = b1 * mom[i] + (T(1) - b1) * p[i];
      var[i] = b2 * var[i] + (T(1) - b2) * p[i] * p[i];
    }
    ++s.step_counter;
  }
}

template <typename T>
void Stage2Set<T>::materialize(ToyDepthModel<T>& model) {
  for (auto& [id, s] : states_) {
    auto& slot = model.slot(id);
    const auto w2 = compose(slot.weight, correction(s), s.alpha.item(), s.beta.item());
    auto wd = slot.weight.mutable_data();
    for (std::size_t i = 0; i < wd.size(); ++i) wd[i] = w2.at(i);
    s.alpha.mutable_data()[0] = T(1);
    s.beta.mutable_data()[0] = T(0);
    for (auto& v : s.accumulator.mutable_data()) v = T(0);
    for (auto& v : s.second_moment.mutable_data()) v = T(0);
    s.step_counter = 0;
  }
}

template <typename T>
T stage2_step(const ToyDepthModel<T>& model, const Tensor<T>& rgb, const Tensor<T>& gt_depth, Stage2Set<T>& set,
              bool stage1_merged) {
  if (!stage1_merged) fail(ErrorCategory::Schedule, "stage 2 requires merged stage-1 adapters");
  auto loss = training_loss(model.forward_depth(rgb, &set), gt_depth);
  const auto grads = backward(loss);
  set.update(grads);
  return loss.item();
}

template <typename T>
MemoryFootprint memory_footprint(const SubspaceRegistry<T>& registry, OptimizerMode mode, std::size_t rank) {
  if (mode == OptimizerMode::Projected && rank == 0) {
    fail(ErrorCategory::Configuration, "projected footprint needs a positive rank");
  }
  MemoryFootprint fp;
  for (const auto* d : registry.layers()) {
    const std::uint64_t m = d->rows, n = d->cols;
    const std::uint64_t floats = mode == OptimizerMode::FullAdam ? 2 * m * n : m * rank + 2 * rank * n + 2;
    fp.floats_per_layer.emplace_back(d->layer_id, floats);
    fp.total_floats += floats;
  }
  return fp;
}

nlohmann::json to_json(const MemoryFootprint& footprint) {
  nlohmann::json layers = nlohmann::json::object();
  for (const auto& [id, n] : footprint.floats_per_layer) layers[id] = n;
  return {{"floats_per_layer", layers}, {"total_floats", footprint.total_floats}};
}

#define DEPTHADAPT_INSTANTIATE(T)                                                                          \
  template Tensor<T> full_param_direction(const Tensor<T>&, const GradientMap<T>&);                        \
  template Tensor<T> compose(const Tensor<T>&, const Tensor<T>&, T, T);                                    \
  template Tensor<T> compose(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> project_gradient(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> reconstruct(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> refresh_projector(const Tensor<T>&, std::size_t, const Tensor<T>*);                   \
  template class Stage2Set<T>;                                                                             \
  template T stage2_step(const ToyDepthModel<T>&, const Tensor<T>&, const Tensor<T>&, Stage2Set<T>&, bool); \
  template MemoryFootprint memory_footprint(const SubspaceRegistry<T>&, OptimizerMode, std::size_t);

DEPTHADAPT_INSTANTIATE(float)
DEPTHADAPT_INSTANTIATE(double)

#undef DEPTHADAPT_INSTANTIATE

}  // namespace depthadapt
