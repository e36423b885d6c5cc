#pragma once

// Reverse-mode differentiation over coarse tensor operations.
//
// A Var is a handle to a node in an acyclic graph. Leaves are either
// parameters (gradients requested) or constants. Every operation records its
// parents and a closure that pushes the node's gradient back to them.
// backward() seeds the scalar loss with 1 and walks the graph in reverse
// topological order; gradient contributions are accumulated in a fixed order
// so repeated runs are bit-identical.

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "nesybicor/tensor.hpp"

namespace nesybicor {

namespace detail {
struct Node;
}

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Gradient after backward(); zeros if the node was not reached.
  const Tensor& grad() const;
  bool requires_grad() const;
  bool valid() const { return node_ != nullptr; }

  /// Scalar value of a one-element node.
  Real item() const;

 private:
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Var make_var(Tensor, std::vector<Var>, std::function<void(detail::Node&)>);
  friend Var constant(Tensor);
  friend Var parameter(Tensor);
  friend void backward(const Var&);
  friend struct detail::Node;
};

namespace detail {
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Adds delta into this node's gradient, allocating it on first use.
  void accumulate(const Tensor& delta);
  Tensor& grad_buffer();
};
}  // namespace detail

Var constant(Tensor value);
Var parameter(Tensor value);

/// Populates gradients of every node reachable from loss. loss must hold one element.
void backward(const Var& loss);

// Differentiable operations. Shapes follow the kernels of the same name.
Var conv2d(const Var& input, const Var& weights, std::size_t stride, std::size_t padding);
Var add_channel_bias(const Var& x, const Var& bias);
Var relu(const Var& x);
Var maxpool(const Var& x, std::size_t window);
Var dense(const Var& x, const Var& weights, const Var& bias);
Var flatten(const Var& x);
Var channel_mean(const Var& x);
/// Row `index` of the leading axis, flattened (e.g. one filter's feature map).
Var select(const Var& x, std::size_t index);
Var softmax_cross_entropy(const Var& logits, std::size_t label);
Var cosine_similarity(const Var& u, const Var& v);
Var sum(const Var& x);
Var sum_squares(const Var& x);
Var add(const Var& a, const Var& b);
Var scale(const Var& x, Real factor);
/// Weighted sum of scalar nodes, accumulated in the order given.
Var weighted_sum(const std::vector<Var>& terms, const std::vector<Real>& weights);

}  // namespace nesybicor
