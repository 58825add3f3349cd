// Copyright (c) 2026, The depthadapt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors with reverse-mode differentiation.
//
// A Tensor is a cheap shared handle to a graph node. Results of operations
// keep their parents alive until the handle is dropped, so a forward pass
// builds the graph implicitly and backward() walks it once. Values are
// immutable except for leaves, which the trainer updates in place between
// steps through mutable_data().

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace depthadapt {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
  // Adds the contribution of grad_out to each parent gradient buffer.
  // parent_grads[i] is null when parent i does not require a gradient.
  using BackwardFn =
      std::function<void(const Node& self, std::span<const T> grad_out, std::span<std::vector<T>*> parent_grads)>;

  std::uint64_t id = 0;
  Shape shape;
  std::vector<T> value;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

std::uint64_t next_node_id();

}  // namespace detail

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  // Result of an operation. Parents that do not require gradients are dropped
  // from the graph; if none remain the result is a constant.
  static Tensor make_result(Shape shape, std::vector<T> values, std::vector<Tensor> parents,
                            typename detail::Node<T>::BackwardFn backward);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  std::uint64_t id() const { return node_->id; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  std::span<T> mutable_data();
  T item() const;
  T at(std::size_t flat_index) const { return node_->value.at(flat_index); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool is_leaf() const { return node_->leaf; }

  // Constant copy, disconnected from the graph.
  Tensor detach() const;

  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node<T>> node_;
};

/// Gradients of the leaves reached from a loss, keyed by leaf identity.
template <typename T>
class GradientMap {
 public:
  bool contains(const Tensor<T>& leaf) const { return grads_.count(leaf.id()) > 0; }
  const Tensor<T>* find(const Tensor<T>& leaf) const;
  const Tensor<T>& at(const Tensor<T>& leaf) const;
  std::size_t size() const { return grads_.size(); }

  void insert(std::uint64_t id, Tensor<T> grad) { grads_.insert_or_assign(id, std::move(grad)); }

 private:
  std::unordered_map<std::uint64_t, Tensor<T>> grads_;
};

/// Reverse-mode sweep from a scalar loss. Leaves that require gradients and are
/// reachable from the loss get an entry; unreached leaves are absent.
template <typename T>
GradientMap<T> backward(const Tensor<T>& loss);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class GradientMap<float>;
extern template class GradientMap<double>;

}  // namespace depthadapt
