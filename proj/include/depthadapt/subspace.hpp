// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Partition of a model's adaptable weights into the conv, MLP and attention
// subspaces. Each sequence keeps forward-pass order.

#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "depthadapt/model.hpp"
#include "json.hpp"

namespace depthadapt {

enum class SubspaceKind { Conv, Mlp, Attention };

std::string_view kind_name(SubspaceKind kind);
SubspaceKind parse_kind(std::string_view name);
/// Comma-separated list such as "mlp,conv,attention".
std::set<SubspaceKind> parse_kinds(std::string_view list);
std::string format_kinds(const std::set<SubspaceKind>& kinds);

template <typename T>
struct LayerDescriptor {
  std::string layer_id;
  SubspaceKind kind = SubspaceKind::Conv;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t position = 0;  // index in the model's forward order
  Tensor<T> weight;          // live handle, shares storage with the model

  bool operator==(const LayerDescriptor& o) const {
    return layer_id == o.layer_id && kind == o.kind && rows == o.rows && cols == o.cols &&
           position == o.position && weight.id() == o.weight.id();
  }
};

struct SubspaceCounts {
  std::size_t conv = 0;
  std::size_t mlp = 0;
  std::size_t attention = 0;

  std::size_t total() const { return conv + mlp + attention; }
  bool operator==(const SubspaceCounts&) const = default;
};

template <typename T>
struct SubspaceRegistry {
  std::vector<LayerDescriptor<T>> conv_layers;
  std::vector<LayerDescriptor<T>> mlp_layers;
  std::vector<LayerDescriptor<T>> attention_layers;

  /// All descriptors in forward-pass order.
  std::vector<const LayerDescriptor<T>*> layers() const;
  const LayerDescriptor<T>* find(std::string_view layer_id) const;
  bool operator==(const SubspaceRegistry&) const = default;
};

template <typename T>
SubspaceRegistry<T> classify_layers(std::span<const WeightSlot<T>> slots);

template <typename T>
SubspaceRegistry<T> classify_layers(const ToyDepthModel<T>& model) {
  return classify_layers<T>(std::span<const WeightSlot<T>>(model.adaptable_weights()));
}

template <typename T>
SubspaceCounts counts(const SubspaceRegistry<T>& registry);

template <typename T>
SubspaceRegistry<T> select_subspaces(const SubspaceRegistry<T>& registry, const std::set<SubspaceKind>& enabled);

/// [{"layer_id", "kind", "m", "n"}, ...] in forward order.
template <typename T>
nlohmann::json registry_to_json(const SubspaceRegistry<T>& registry);

}  // namespace depthadapt
