#pragma once

#include <functional>

#include "nesybicor/tensor.hpp"

namespace nesybicor {

/// Largest |analytic - central difference| / max(1, |analytic|) over the
/// coordinates of x. `f` evaluates the scalar function at a point.
Real finite_diff_check(const std::function<Real(const Tensor&)>& f, const Tensor& x, const Tensor& analytic,
                       Real h);

/// Same check with the analytic gradient taken from the differentiable graph:
/// `build` maps a parameter leaf to a scalar loss node.
class Var;
Real finite_diff_check(const std::function<Var(const Var&)>& build, const Tensor& x, Real h);

}  // namespace nesybicor
