#include "nesybicor/adam.hpp"

#include <cmath>

namespace nesybicor {

void adam_update(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size())
    throw ShapeError("adam_update: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Tensor::zeros_like(p));
      state.second_moment.push_back(Tensor::zeros_like(p));
    }
  }
  if (state.first_moment.size() != params.size())
    throw ShapeError("adam_update: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || params[i].shape() != state.first_moment[i].shape())
      throw ShapeError("adam_update: parameter " + std::to_string(i) + " has shape " +
                       shape_string(params[i].shape()) + " but gradient " + shape_string(grads[i].shape()));
  }

  ++state.step;
  const Real b1 = state.beta1, b2 = state.beta2;
  const Real correction1 = 1 - std::pow(b1, static_cast<Real>(state.step));
  const Real correction2 = 1 - std::pow(b2, static_cast<Real>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const Tensor& g = grads[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1 - b1) * g[j];
      v[j] = b2 * v[j] + (1 - b2) * g[j] * g[j];
      const Real m_hat = m[j] / correction1;
      const Real v_hat = v[j] / correction2;
      p[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace nesybicor
