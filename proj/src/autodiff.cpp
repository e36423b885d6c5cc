#include "nesybicor/autodiff.hpp"

#include <stdexcept>
#include <unordered_set>

#include "nesybicor/kernels.hpp"

namespace nesybicor {

namespace detail {

Tensor& Node::grad_buffer() {
  if (grad.shape() != value.shape()) grad = Tensor::zeros_like(value);
  return grad;
}

void Node::accumulate(const Tensor& delta) {
  Tensor& g = grad_buffer();
  if (delta.size() != g.size())
    throw ShapeError("gradient " + shape_string(delta.shape()) + " does not match value " +
                     shape_string(value.shape()));
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

}  // namespace detail

using detail::Node;

const Tensor& Var::value() const { return node_->value; }

const Tensor& Var::grad() const { return node_->grad_buffer(); }

bool Var::requires_grad() const { return node_->requires_grad; }

Real Var::item() const {
  if (node_->value.size() != 1)
    throw ShapeError("item() on non-scalar " + shape_string(node_->value.shape()));
  return node_->value[0];
}

Var make_var(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (auto& p : parents) {
    node->requires_grad = node->requires_grad || p.node_->requires_grad;
    node->parents.push_back(p.node_);
  }
  if (node->requires_grad) node->backward = std::move(backward_fn);
  return Var(std::move(node));
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss.valid()) throw std::invalid_argument("backward on an empty Var");
  if (loss.node_->value.size() != 1)
    throw ShapeError("backward needs a scalar loss, got " + shape_string(loss.node_->value.shape()));

  // Iterative post-order DFS gives a topological order with parents first.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node_.get(), 0}};
  seen.insert(loss.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->grad = Tensor::zeros_like(n->value);
  loss.node_->grad[0] = 1;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

Var conv2d(const Var& input, const Var& weights, std::size_t stride, std::size_t padding) {
  return make_var(kernels::conv2d(input.value(), weights.value(), stride, padding), {input, weights},
                  [stride, padding](Node& self) {
                    Node& in = *self.parents[0];
                    Node& w = *self.parents[1];
                    kernels::conv2d_backward(in.value, w.value, self.grad, stride, padding,
                                             in.requires_grad ? &in.grad_buffer() : nullptr,
                                             w.requires_grad ? &w.grad_buffer() : nullptr);
                  });
}

Var add_channel_bias(const Var& x, const Var& bias) {
  return make_var(kernels::add_channel_bias(x.value(), bias.value()), {x, bias}, [](Node& self) {
    Node& in = *self.parents[0];
    Node& b = *self.parents[1];
    if (in.requires_grad) in.accumulate(self.grad);
    if (b.requires_grad) {
      Tensor& gb = b.grad_buffer();
      const std::size_t per = self.grad.size() / gb.size();
      for (std::size_t k = 0; k < gb.size(); ++k) {
        Real acc = 0;
        for (std::size_t i = 0; i < per; ++i) acc += self.grad[k * per + i];
        gb[k] += acc;
      }
    }
  });
}

Var relu(const Var& x) {
  return make_var(kernels::relu(x.value()), {x}, [](Node& self) {
    Node& in = *self.parents[0];
    Tensor& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (in.value[i] > 0) g[i] += self.grad[i];
  });
}

Var maxpool(const Var& x, std::size_t window) {
  auto pooled = kernels::maxpool(x.value(), window);
  auto argmax = std::make_shared<std::vector<std::size_t>>(std::move(pooled.argmax));
  return make_var(std::move(pooled.output), {x}, [argmax](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < argmax->size(); ++o) g[(*argmax)[o]] += self.grad[o];
  });
}

Var dense(const Var& x, const Var& weights, const Var& bias) {
  return make_var(kernels::dense(x.value(), weights.value(), bias.value()), {x, weights, bias}, [](Node& self) {
    Node& in = *self.parents[0];
    Node& w = *self.parents[1];
    Node& b = *self.parents[2];
    const std::size_t c = w.value.dim(0), d = w.value.dim(1);
    if (in.requires_grad) {
      Tensor& gx = in.grad_buffer();
      for (std::size_t i = 0; i < c; ++i) {
        const Real gi = self.grad[i];
        const Real* row = w.value.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) gx[j] += gi * row[j];
      }
    }
    if (w.requires_grad) {
      Tensor& gw = w.grad_buffer();
      for (std::size_t i = 0; i < c; ++i) {
        const Real gi = self.grad[i];
        Real* row = gw.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += gi * in.value[j];
      }
    }
    if (b.requires_grad) b.accumulate(self.grad);
  });
}

Var flatten(const Var& x) {
  return make_var(x.value().reshaped({x.value().size()}), {x},
                  [](Node& self) { self.parents[0]->accumulate(self.grad); });
}

Var channel_mean(const Var& x) {
  return make_var(kernels::channel_mean(x.value()), {x}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const std::size_t c = g.dim(0), n = g.size() / c;
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t i = 0; i < n; ++i) g[k * n + i] += self.grad[k] / static_cast<Real>(n);
  });
}

Var select(const Var& x, std::size_t index) {
  const Tensor& v = x.value();
  if (v.rank() < 1 || index >= v.dim(0))
    throw ShapeError("select index " + std::to_string(index) + " out of range for " + shape_string(v.shape()));
  const std::size_t per = v.size() / v.dim(0);
  std::vector<Real> slice(v.data() + index * per, v.data() + (index + 1) * per);
  return make_var(Tensor({per}, std::move(slice)), {x}, [index, per](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < per; ++i) g[index * per + i] += self.grad[i];
  });
}

Var softmax_cross_entropy(const Var& logits, std::size_t label) {
  const Real loss = kernels::softmax_cross_entropy(logits.value(), label);
  return make_var(Tensor({1}, {loss}), {logits}, [label](Node& self) {
    Node& in = *self.parents[0];
    Tensor p = kernels::softmax(in.value);
    p[label] -= 1;
    Tensor& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * p[i];
  });
}

Var cosine_similarity(const Var& u, const Var& v) {
  const Real s = kernels::cosine_similarity(u.value(), v.value());
  return make_var(Tensor({1}, {s}), {u, v}, [](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    const Real seed = self.grad[0];
    if (a.requires_grad) {
      Tensor ga = kernels::cosine_similarity_grad(a.value, b.value);
      Tensor& g = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed * ga[i];
    }
    if (b.requires_grad) {
      Tensor gb = kernels::cosine_similarity_grad(b.value, a.value);
      Tensor& g = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed * gb[i];
    }
  });
}

Var sum(const Var& x) {
  Real s = 0;
  for (Real v : x.value().values()) s += v;
  return make_var(Tensor({1}, {s}), {x}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (Real& gi : g.values()) gi += self.grad[0];
  });
}

Var sum_squares(const Var& x) {
  return make_var(Tensor({1}, {kernels::sum_squares(x.value())}), {x}, [](Node& self) {
    Node& in = *self.parents[0];
    Tensor& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2 * in.value[i] * self.grad[0];
  });
}

Var add(const Var& a, const Var& b) {
  if (a.value().shape() != b.value().shape())
    throw ShapeError("add shape mismatch: " + shape_string(a.value().shape()) + " vs " +
                     shape_string(b.value().shape()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_var(std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->accumulate(self.grad);
  });
}

Var scale(const Var& x, Real factor) {
  Tensor out = x.value();
  for (Real& v : out.values()) v *= factor;
  return make_var(std::move(out), {x}, [factor](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Var weighted_sum(const std::vector<Var>& terms, const std::vector<Real>& weights) {
  if (terms.size() != weights.size()) throw std::invalid_argument("weighted_sum: terms and weights differ in length");
  Real s = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].value().size() != 1) throw ShapeError("weighted_sum terms must be scalars");
    s += weights[i] * terms[i].value()[0];
  }
  return make_var(Tensor({1}, {s}), terms, [weights](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      Node& p = *self.parents[i];
      if (p.requires_grad) p.grad_buffer()[0] += weights[i] * self.grad[0];
    }
  });
}

}  // namespace nesybicor
