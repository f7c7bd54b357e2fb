// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "adlm/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "adlm/errors.hpp"

namespace adlm {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

std::uint64_t next_sequence() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

}  // namespace detail

namespace {
thread_local int no_grad_depth = 0;
}

NoGradGuard::NoGradGuard() { ++no_grad_depth; }
NoGradGuard::~NoGradGuard() { --no_grad_depth; }
bool grad_enabled() { return no_grad_depth == 0; }

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " elements");
  }
  node_ = std::make_shared<detail::Node<T>>();
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
  node_->sequence = detail::next_sequence();
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
detail::Node<T>& Tensor<T>::node() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return *node_;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  return node().shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

template <typename T>
std::size_t Tensor<T>::numel() const {
  return node().value.size();
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  return node().value;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  return node().value;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ContractError("item() on non-scalar tensor of shape " + shape_str(shape()));
  return node().value[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return node().requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
  if (!node().leaf) throw ContractError("requires_grad can only be changed on leaf tensors");
  node_->requires_grad = on;
}

template <typename T>
bool Tensor<T>::is_leaf() const {
  return node().leaf;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return !node().grad.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  return node().grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  node().grad.clear();
}

template <typename T>
Tensor<T> Tensor<T>::make_result(Shape shape, std::vector<T> data, std::vector<Tensor> parents,
                                 std::function<void(detail::Node<T>&)> backward_fn) {
  Tensor out(std::move(shape), std::move(data), false);
  out.node_->leaf = false;
  if (!grad_enabled()) return out;
  bool track = false;
  for (const Tensor& p : parents) track = track || p.requires_grad();
  if (!track) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (Tensor& p : parents) out.node_->parents.push_back(std::move(p.node_));
  out.node_->backward_fn = std::move(backward_fn);
  return out;
}

template <typename T>
void Tensor<T>::backward() const {
  detail::Node<T>& root = node();
  if (root.value.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_str(root.shape));
  }
  if (root.consumed) throw ContractError("backward() called twice on the same graph");
  if (!root.requires_grad) throw ContractError("backward() on a tensor that is not on a gradient graph");

  // Creation order is a topological order of the record, so a descending
  // sort by sequence visits every node after all of its consumers.
  // Owning handles keep intermediate nodes alive while parent links are cut.
  std::vector<std::shared_ptr<detail::Node<T>>> order;
  std::unordered_set<detail::Node<T>*> seen;
  std::vector<std::shared_ptr<detail::Node<T>>> stack{node_};
  seen.insert(&root);
  while (!stack.empty()) {
    std::shared_ptr<detail::Node<T>> n = std::move(stack.back());
    stack.pop_back();
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
    }
    order.push_back(std::move(n));
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a->sequence > b->sequence; });

  root.ensure_grad()[0] += T(1);
  for (const auto& n : order) {
    if (n->leaf) continue;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    n->grad.clear();
    n->grad.shrink_to_fit();
    n->backward_fn = nullptr;
    n->parents.clear();
    n->consumed = true;
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(shape(), node().value, false);
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(shape(), node().value, node().leaf && node().requires_grad);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace adlm
