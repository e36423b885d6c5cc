#include "nesybicor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nesybicor/autodiff.hpp"

namespace nesybicor {

Real finite_diff_check(const std::function<Real(const Tensor&)>& f, const Tensor& x, const Tensor& analytic,
                       Real h) {
  if (!(h > 0)) throw std::invalid_argument("finite_diff_check step must be positive");
  if (analytic.size() != x.size()) throw ShapeError("analytic gradient does not match the point");
  Real worst = 0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const Real up = f(probe);
    probe[i] = x[i] - h;
    const Real down = f(probe);
    probe[i] = x[i];
    const Real numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(Real(1), std::abs(analytic[i])));
  }
  return worst;
}

Real finite_diff_check(const std::function<Var(const Var&)>& build, const Tensor& x, Real h) {
  Var leaf = parameter(x);
  Var loss = build(leaf);
  backward(loss);
  const Tensor analytic = leaf.grad();
  return finite_diff_check([&](const Tensor& point) { return build(constant(point)).item(); }, x, analytic, h);
}

}  // namespace nesybicor
