// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthadapt/tensor.hpp"

#include <atomic>
#include <unordered_set>

#include "depthadapt/errors.hpp"

namespace depthadapt {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace detail {
std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) fail(ErrorCategory::Dimension, "zero extent in shape " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    fail(ErrorCategory::Dimension, "shape " + shape_str(shape) + " does not match " +
                                       std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->id = detail::next_node_id();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::make_result(Shape shape, std::vector<T> values, std::vector<Tensor> parents,
                                 typename detail::Node<T>::BackwardFn backward) {
  Tensor out = from(std::move(shape), std::move(values), false);
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (!any) return out;
  auto& node = *out.node_;
  node.leaf = false;
  node.requires_grad = true;
  node.parents.reserve(parents.size());
  for (auto& p : parents) node.parents.push_back(p.node_);
  node.backward = std::move(backward);
  return out;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!node_->leaf) fail(ErrorCategory::Contract, "in-place update of a non-leaf tensor");
  return node_->value;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) fail(ErrorCategory::Contract, "item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool flag) {
  if (!node_->leaf) fail(ErrorCategory::Contract, "requires_grad can only be set on leaves");
  node_->requires_grad = flag;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), node_->value, false);
}

template <typename T>
const Tensor<T>* GradientMap<T>::find(const Tensor<T>& leaf) const {
  auto it = grads_.find(leaf.id());
  return it == grads_.end() ? nullptr : &it->second;
}

template <typename T>
const Tensor<T>& GradientMap<T>::at(const Tensor<T>& leaf) const {
  const auto* g = find(leaf);
  if (!g) fail(ErrorCategory::State, "no gradient recorded for tensor " + std::to_string(leaf.id()));
  return *g;
}

template <typename T>
GradientMap<T> backward(const Tensor<T>& loss) {
  using NodeT = detail::Node<T>;
  if (!loss.defined() || loss.numel() != 1) {
    fail(ErrorCategory::Contract,
         "backward needs a scalar loss, got shape " + (loss.defined() ? shape_str(loss.shape()) : "<null>"));
  }
  GradientMap<T> out;
  if (!loss.requires_grad()) return out;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> visited;
  std::vector<std::pair<NodeT*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeT* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<NodeT*, std::vector<T>> grads;
  grads[loss.node().get()] = std::vector<T>{T(1)};
  std::vector<std::vector<T>*> parent_grads;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* node = *it;
    auto g = grads.find(node);
    if (g == grads.end()) continue;
    if (node->leaf) {
      out.insert(node->id, Tensor<T>::from(node->shape, std::move(g->second)));
      grads.erase(g);
      continue;
    }
    parent_grads.assign(node->parents.size(), nullptr);
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      NodeT* p = node->parents[i].get();
      if (!p->requires_grad) continue;
      auto [slot, inserted] = grads.try_emplace(p);
      if (inserted) slot->second.assign(p->value.size(), T(0));
      parent_grads[i] = &slot->second;
    }
    node->backward(*node, g->second, parent_grads);
    grads.erase(g);
  }
  return out;
}

template class Tensor<float>;
template class Tensor<double>;
template class GradientMap<float>;
template class GradientMap<double>;
template GradientMap<float> backward(const Tensor<float>&);
template GradientMap<double> backward(const Tensor<double>&);

}  // namespace depthadapt
