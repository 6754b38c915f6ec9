#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "agmax/error.hpp"
#include "agmax/tensor.hpp"

namespace agmax::diff {

/**
 * Node in a define-by-run reverse-mode differentiation graph. Values are
 * immutable once the node exists; only `grad` accumulates during backward.
 * The graph is rebuilt every training step, so nodes own their parents via
 * shared_ptr and the whole step graph dies when the root goes out of scope.
 */
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // same shape as value, zero-initialized
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Scatters this node's grad into the parents' grads.
  std::function<void(Node&)> backprop;

  explicit Node(Tensor<T> v, bool req = false)
      : value(std::move(v)), grad(value.shape()), requires_grad(req) {}

  void zero_grad() { grad.fill(T{0}); }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

/// Leaf that participates in differentiation (parameters, attack inputs).
template <typename T>
NodePtr<T> variable(Tensor<T> value) {
  return std::make_shared<Node<T>>(std::move(value), true);
}

/// Leaf excluded from differentiation (inputs, targets).
template <typename T>
NodePtr<T> constant(Tensor<T> value) {
  return std::make_shared<Node<T>>(std::move(value), false);
}

template <typename T>
NodePtr<T> constant_scalar(T value) {
  return constant(Tensor<T>::scalar(value));
}

/// Same value, no history: gradients stop here.
template <typename T>
NodePtr<T> detach(const NodePtr<T>& x) {
  return constant(x->value);
}

namespace detail {

// Post-order over parents, iteratively; the visit order depends only on the
// graph structure, so backward is deterministic for identical graphs.
template <typename T>
std::vector<Node<T>*> topo_order(Node<T>* root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  struct Frame {
    Node<T>* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_parent < top.node->parents.size()) {
      Node<T>* parent = top.node->parents[top.next_parent++].get();
      if (visited.insert(parent).second) {
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }
  return order;  // parents before children; reverse for backprop
}

}  // namespace detail

/**
 * Reverse-mode sweep from a scalar root. Seeds d(root)/d(root) = 1 and
 * accumulates gradients additively across fan-out, so every reachable node
 * with requires_grad ends up holding d(root)/d(node).
 */
template <typename T>
void backward(const NodePtr<T>& root) {
  if (!root->value.is_scalar()) {
    throw Error("backward: root must be scalar, got shape " +
                ShapeError::to_string(root->value.shape()));
  }
  auto order = detail::topo_order(root.get());
  root->grad.fill(T{0});
  root->grad[0] = T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backprop) node->backprop(*node);
  }
}

/**
 * Named trainable parameters with deterministic (insertion) iteration order.
 * Names are unique; the optimizer and the checkpoint format both rely on the
 * order being stable across runs with equal config.
 */
template <typename T>
class ParameterStore {
public:
  NodePtr<T>& add(const std::string& name, Tensor<T> init) {
    if (index_.contains(name)) {
      throw Error("ParameterStore: duplicate parameter name '" + name + "'");
    }
    index_.emplace(name, params_.size());
    params_.emplace_back(name, variable(std::move(init)));
    return params_.back().second;
  }

  NodePtr<T>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw Error("ParameterStore: unknown parameter '" + name + "'");
    }
    return params_[it->second].second;
  }

  const NodePtr<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw Error("ParameterStore: unknown parameter '" + name + "'");
    }
    return params_[it->second].second;
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  std::size_t size() const { return params_.size(); }

  std::size_t total_parameters() const {
    std::size_t n = 0;
    for (const auto& [name, node] : params_) n += node->value.numel();
    return n;
  }

  void zero_grads() {
    for (auto& [name, node] : params_) node->zero_grad();
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

private:
  std::vector<std::pair<std::string, NodePtr<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace agmax::diff
