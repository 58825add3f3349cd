// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/adapters.hpp"

#include <random>

#include "depthadapt/errors.hpp"
#include "depthadapt/hash.hpp"
#include "depthadapt/kernels.hpp"
#include "depthadapt/ops.hpp"

namespace depthadapt {

namespace {

template <typename T>
void check_shapes(const Tensor<T>& w, const LoraAdapter<T>& a) {
  if (w.rank() != 2 || a.B.rank() != 2 || a.A.rank() != 2 || a.B.dim(0) != w.dim(0) || a.A.dim(1) != w.dim(1) ||
      a.B.dim(1) != a.A.dim(0)) {
    fail(ErrorCategory::Dimension, "adapter '" + a.layer_id + "': W " + shape_str(w.shape()) + ", B " +
                                       shape_str(a.B.shape()) + ", A " + shape_str(a.A.shape()) + " are inconsistent");
  }
}

}  // namespace

template <typename T>
Tensor<T> effective_weight(const Tensor<T>& w, const LoraAdapter<T>& adapter) {
  check_shapes(w, adapter);
  return add(w, matmul(adapter.B, adapter.A));
}

template <typename T>
void merge_into(Tensor<T>& w, const LoraAdapter<T>& adapter) {
  check_shapes(w, adapter);
  const std::size_t m = w.dim(0), n = w.dim(1), r = adapter.B.dim(1);
  std::vector<T> ba(m * n);
  kernels::matmul(adapter.B.data().data(), adapter.A.data().data(), ba.data(), m, r, n);
  auto wd = w.mutable_data();
  for (std::size_t i = 0; i < ba.size(); ++i) wd[i] = wd[i] + ba[i];
}

template <typename T>
AdapterSet<T> AdapterSet<T>::attach(const SubspaceRegistry<T>& selection, std::size_t rank, std::uint64_t seed) {
  AdapterSet set;
  set.registry_ = selection;
  set.rank_ = rank;
  for (const auto* d : selection.layers()) {
    if (rank == 0 || rank > std::min(d->rows, d->cols)) {
      fail(ErrorCategory::Rank, "rank " + std::to_string(rank) + " invalid for layer '" + d->layer_id + "' (" +
                                    std::to_string(d->rows) + "x" + std::to_string(d->cols) + ")");
    }
    std::mt19937_64 rng(seed ^ fnv1a64(d->layer_id));
    std::normal_distribution<double> dist(0.0, kAdapterInitStddev);
    std::vector<T> a(rank * d->cols);
    for (auto& v : a) v = static_cast<T>(dist(rng));
    LoraAdapter<T> ad;
    ad.layer_id = d->layer_id;
    ad.rank = rank;
    ad.B = Tensor<T>::zeros(Shape{d->rows, rank}, true);
    ad.A = Tensor<T>::from(Shape{rank, d->cols}, std::move(a), true);
    set.adapters_.emplace(d->layer_id, std::move(ad));
  }
  return set;
}

template <typename T>
Tensor<T> AdapterSet<T>::resolve(const WeightSlot<T>& slot) const {
  auto it = adapters_.find(slot.layer_id);
  if (it == adapters_.end()) return slot.weight;
  return effective_weight(slot.weight, it->second);
}

template <typename T>
const LoraAdapter<T>* AdapterSet<T>::find(const std::string& layer_id) const {
  auto it = adapters_.find(layer_id);
  return it == adapters_.end() ? nullptr : &it->second;
}

template <typename T>
std::vector<Tensor<T>> AdapterSet<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (const auto* d : registry_.layers()) {
    if (const auto* a = find(d->layer_id)) {
      out.push_back(a->B);
      out.push_back(a->A);
    }
  }
  return out;
}

template <typename T>
void AdapterSet<T>::merge(WeightSlot<T>& slot) {
  if (merged_.count(slot.layer_id)) fail(ErrorCategory::State, "adapter for '" + slot.layer_id + "' already merged");
  auto it = adapters_.find(slot.layer_id);
  if (it == adapters_.end()) fail(ErrorCategory::State, "no adapter attached to '" + slot.layer_id + "'");
  merge_into(slot.weight, it->second);
  adapters_.erase(it);
  merged_.insert(slot.layer_id);
}

template <typename T>
void AdapterSet<T>::merge_all(ToyDepthModel<T>& model) {
  for (const auto* d : registry_.layers()) {
    if (adapters_.count(d->layer_id)) merge(model.slot(d->layer_id));
  }
}

template <typename T>
void AdapterSet<T>::set_factors(const std::string& layer_id, Tensor<T> B, Tensor<T> A) {
  auto it = adapters_.find(layer_id);
  if (it == adapters_.end()) fail(ErrorCategory::State, "no adapter attached to '" + layer_id + "'");
  if (B.shape() != it->second.B.shape() || A.shape() != it->second.A.shape()) {
    fail(ErrorCategory::Dimension, "adapter '" + layer_id + "': restored factors have wrong shape");
  }
  B.set_requires_grad(true);
  A.set_requires_grad(true);
  it->second.B = std::move(B);
  it->second.A = std::move(A);
}

std::string format_millions(std::uint64_t count) {
  std::uint64_t tenths = count / 100000;
  const std::uint64_t rem = count % 100000;
  if (rem > 50000 || (rem == 50000 && (tenths % 2 == 1))) ++tenths;
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

template <typename T>
ParamCount trainable_param_count(const AdapterSet<T>& set, const SubspaceRegistry<T>& registry, int stage,
                                 std::size_t projector_rank) {
  if (stage != 1 && stage != 2) fail(ErrorCategory::Configuration, "stage must be 1 or 2");
  ParamCount pc;
  for (const auto* d : set.registry().layers()) {
    pc.adapter_params += d->rows * set.rank() + set.rank() * d->cols;
    if (stage == 2) pc.adapter_params += 2 + d->rows * projector_rank + projector_rank * d->cols;
  }
  for (const auto* d : registry.layers()) pc.base_params += d->rows * d->cols;
  pc.total = pc.adapter_params + pc.base_params;
  pc.formatted_millions = format_millions(pc.total);
  return pc;
}

nlohmann::json to_json(const ParamCount& count) {
  return {{"adapter_params", count.adapter_params},
          {"base_params", count.base_params},
          {"total", count.total},
          {"total_millions", count.formatted_millions}};
}

#define DEPTHADAPT_INSTANTIATE(T)                                                                        \
  template Tensor<T> effective_weight(const Tensor<T>&, const LoraAdapter<T>&);                          \
  template void merge_into(Tensor<T>&, const LoraAdapter<T>&);                                           \
  template class AdapterSet<T>;                                                                          \
  template ParamCount trainable_param_count(const AdapterSet<T>&, const SubspaceRegistry<T>&, int, std::size_t);

DEPTHADAPT_INSTANTIATE(float)
DEPTHADAPT_INSTANTIATE(double)

#undef DEPTHADAPT_INSTANTIATE

}  // namespace depthadapt
