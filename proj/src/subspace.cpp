// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/subspace.hpp"

#include <algorithm>
#include <sstream>

#include "depthadapt/errors.hpp"

namespace depthadapt {

std::string_view kind_name(SubspaceKind kind) {
  switch (kind) {
    case SubspaceKind::Conv: return "conv";
    case SubspaceKind::Mlp: return "mlp";
    case SubspaceKind::Attention: return "attention";
  }
  return "?";
}

SubspaceKind parse_kind(std::string_view name) {
  if (name == "conv") return SubspaceKind::Conv;
  if (name == "mlp") return SubspaceKind::Mlp;
  if (name == "attention" || name == "attn") return SubspaceKind::Attention;
  fail(ErrorCategory::Configuration, "unknown subspace '" + std::string(name) + "' (expected conv, mlp, attention)");
}

std::set<SubspaceKind> parse_kinds(std::string_view list) {
  std::set<SubspaceKind> out;
  std::stringstream ss{std::string(list)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char ch) { return std::isspace(ch); }),
               item.end());
    if (!item.empty()) out.insert(parse_kind(item));
  }
  return out;
}

std::string format_kinds(const std::set<SubspaceKind>& kinds) {
  std::string out;
  for (auto k : kinds) {
    if (!out.empty()) out += ",";
    out += kind_name(k);
  }
  return out;
}

template <typename T>
std::vector<const LayerDescriptor<T>*> SubspaceRegistry<T>::layers() const {
  std::vector<const LayerDescriptor<T>*> out;
  for (const auto* seq : {&conv_layers, &mlp_layers, &attention_layers})
    for (const auto& d : *seq) out.push_back(&d);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->position < b->position; });
  return out;
}

template <typename T>
const LayerDescriptor<T>* SubspaceRegistry<T>::find(std::string_view layer_id) const {
  for (const auto* d : layers())
    if (d->layer_id == layer_id) return d;
  return nullptr;
}

template <typename T>
SubspaceRegistry<T> classify_layers(std::span<const WeightSlot<T>> slots) {
  SubspaceRegistry<T> reg;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    if (!seen.insert(s.layer_id).second) {
      fail(ErrorCategory::Classification, "layer '" + s.layer_id + "' appears twice");
    }
    LayerDescriptor<T> d;
    d.layer_id = s.layer_id;
    d.rows = s.rows;
    d.cols = s.cols;
    d.position = i;
    d.weight = s.weight;
    if (s.family == "conv") {
      d.kind = SubspaceKind::Conv;
      reg.conv_layers.push_back(std::move(d));
    } else if (s.family == "mlp") {
      d.kind = SubspaceKind::Mlp;
      reg.mlp_layers.push_back(std::move(d));
    } else if (s.family == "attention") {
      d.kind = SubspaceKind::Attention;
      reg.attention_layers.push_back(std::move(d));
    } else {
      fail(ErrorCategory::Classification,
           "layer '" + s.layer_id + "' has unknown weight kind '" + s.family + "'");
    }
  }
  return reg;
}

template <typename T>
SubspaceCounts counts(const SubspaceRegistry<T>& registry) {
  return {registry.conv_layers.size(), registry.mlp_layers.size(), registry.attention_layers.size()};
}

template <typename T>
SubspaceRegistry<T> select_subspaces(const SubspaceRegistry<T>& registry, const std::set<SubspaceKind>& enabled) {
  if (enabled.empty()) fail(ErrorCategory::Configuration, "at least one subspace must be enabled");
  SubspaceRegistry<T> out;
  if (enabled.count(SubspaceKind::Conv)) out.conv_layers = registry.conv_layers;
  if (enabled.count(SubspaceKind::Mlp)) out.mlp_layers = registry.mlp_layers;
  if (enabled.count(SubspaceKind::Attention)) out.attention_layers = registry.attention_layers;
  return out;
}

template <typename T>
nlohmann::json registry_to_json(const SubspaceRegistry<T>& registry) {
  auto arr = nlohmann::json::array();
  for (const auto* d : registry.layers()) {
    arr.push_back({{"layer_id", d->layer_id}, {"kind", std::string(kind_name(d->kind))}, {"m", d->rows},
                   {"n", d->cols}});
  }
  return arr;
}

#define DEPTHADAPT_INSTANTIATE(T)                                                                        \
  template struct SubspaceRegistry<T>;                                                                   \
  template SubspaceRegistry<T> classify_layers(std::span<const WeightSlot<T>>);                          \
  template SubspaceCounts counts(const SubspaceRegistry<T>&);                                            \
  template SubspaceRegistry<T> select_subspaces(const SubspaceRegistry<T>&, const std::set<SubspaceKind>&); \
  template nlohmann::json registry_to_json(const SubspaceRegistry<T>&);

DEPTHADAPT_INSTANTIATE(float)
DEPTHADAPT_INSTANTIATE(double)

#undef DEPTHADAPT_INSTANTIATE

}  // namespace depthadapt
