#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nesybicor/tensor.hpp"

namespace nesybicor {

struct AdamState {
  Real learning_rate = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

/// One bias-corrected Adam step. Accumulators are created on the first call.
void adam_update(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace nesybicor
