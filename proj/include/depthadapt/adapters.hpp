// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Low-rank adapters: the forward pass sees W + B*A for every adapted layer
// while W stays frozen. B is m x r (zero at attach), A is r x n. No rank
// scaling factor is applied.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "depthadapt/model.hpp"
#include "depthadapt/subspace.hpp"
#include "json.hpp"

namespace depthadapt {

template <typename T>
struct LoraAdapter {
  std::string layer_id;
  std::size_t rank = 0;
  Tensor<T> B;  // m x r
  Tensor<T> A;  // r x n
};

inline constexpr double kAdapterInitStddev = 0.02;

/// W + B*A, differentiable in all three operands.
template <typename T>
Tensor<T> effective_weight(const Tensor<T>& w, const LoraAdapter<T>& adapter);

/// In-place W <- W + B*A. Bitwise equal to effective_weight's values.
template <typename T>
void merge_into(Tensor<T>& w, const LoraAdapter<T>& adapter);

template <typename T>
class AdapterSet : public WeightResolver<T> {
 public:
  AdapterSet() = default;

  /// B = 0, A ~ N(0, 0.02^2) seeded per (seed, layer_id). Throws a rank error
  /// when rank is 0 or exceeds min(m, n) for any selected layer.
  static AdapterSet attach(const SubspaceRegistry<T>& selection, std::size_t rank, std::uint64_t seed);

  Tensor<T> resolve(const WeightSlot<T>& slot) const override;

  const SubspaceRegistry<T>& registry() const { return registry_; }
  const std::map<std::string, LoraAdapter<T>>& adapters() const { return adapters_; }
  const LoraAdapter<T>* find(const std::string& layer_id) const;
  std::size_t rank() const { return rank_; }
  std::size_t size() const { return adapters_.size(); }

  /// Trainable factors (B then A per layer, forward order).
  std::vector<Tensor<T>> parameters() const;

  /// Folds the adapter into the slot's weight and removes it. Merging a layer
  /// twice is a state error.
  void merge(WeightSlot<T>& slot);
  void merge_all(ToyDepthModel<T>& model);
  bool is_merged(const std::string& layer_id) const { return merged_.count(layer_id) > 0; }

  /// Replaces the factors of an attached layer (checkpoint restore).
  void set_factors(const std::string& layer_id, Tensor<T> B, Tensor<T> A);

 private:
  SubspaceRegistry<T> registry_;
  std::size_t rank_ = 0;
  std::map<std::string, LoraAdapter<T>> adapters_;
  std::set<std::string> merged_;
};

struct ParamCount {
  std::uint64_t adapter_params = 0;
  std::uint64_t base_params = 0;
  std::uint64_t total = 0;
  std::string formatted_millions;
};

/// total / 1e6 rounded half-even to one decimal, e.g. 99100000 -> "99.1".
std::string format_millions(std::uint64_t count);

/// Stage 1: adapter_params = sum(m*r + r*n) over the adapter set. Stage 2 adds,
/// per adapted layer, the alpha/beta scalars plus projector (m*r_hat) and
/// accumulator (r_hat*n) entries. base_params sums m*n over `registry`.
template <typename T>
ParamCount trainable_param_count(const AdapterSet<T>& set, const SubspaceRegistry<T>& registry, int stage,
                                 std::size_t projector_rank = 4);

nlohmann::json to_json(const ParamCount& count);

}  // namespace depthadapt
