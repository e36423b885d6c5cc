#include "nesybicor/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nesybicor::kernels {

namespace {

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t filters, kh, kw;
  std::size_t out_h, out_w;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weights, std::size_t stride, std::size_t padding) {
  if (input.rank() != 3) throw ShapeError("conv2d input must be [C,H,W], got " + shape_string(input.shape()));
  if (weights.rank() != 4)
    throw ShapeError("conv2d kernels must be [K,C,h,w], got " + shape_string(weights.shape()));
  if (stride < 1) throw std::invalid_argument("conv2d stride must be >= 1");
  if (input.dim(0) != weights.dim(1))
    throw ShapeError("conv2d channel mismatch: input " + shape_string(input.shape()) + " has " +
                     std::to_string(input.dim(0)) + " channels but kernels " + shape_string(weights.shape()) +
                     " expect " + std::to_string(weights.dim(1)));
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), weights.dim(0), weights.dim(2), weights.dim(3), 0, 0};
  g.out_h = conv_output_extent(g.height, g.kh, stride, padding);
  g.out_w = conv_output_extent(g.width, g.kw, stride, padding);
  return g;
}

// Output rows [lo, hi) whose input row oy*stride + offset - padding lies inside [0, extent).
void valid_range(std::size_t out_extent, std::size_t in_extent, std::size_t stride, std::size_t offset,
                 std::size_t padding, std::size_t& lo, std::size_t& hi) {
  lo = 0;
  while (lo < out_extent && lo * stride + offset < padding) ++lo;
  hi = lo;
  while (hi < out_extent && hi * stride + offset - padding < in_extent) ++hi;
}

}  // namespace

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (kernel > input + 2 * padding)
    throw ShapeError("kernel extent " + std::to_string(kernel) + " exceeds padded input extent " +
                     std::to_string(input + 2 * padding));
  return (input + 2 * padding - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weights, std::size_t stride, std::size_t padding) {
  const auto g = conv_geometry(input, weights, stride, padding);
  Tensor out({g.filters, g.out_h, g.out_w});
  const Real* in = input.data();
  const Real* w = weights.data();
  Real* o = out.data();
  for (std::size_t k = 0; k < g.filters; ++k) {
    Real* ok = o + k * g.out_h * g.out_w;
    for (std::size_t c = 0; c < g.channels; ++c) {
      const Real* ic = in + c * g.height * g.width;
      for (std::size_t dy = 0; dy < g.kh; ++dy) {
        std::size_t y_lo, y_hi;
        valid_range(g.out_h, g.height, stride, dy, padding, y_lo, y_hi);
        for (std::size_t dx = 0; dx < g.kw; ++dx) {
          std::size_t x_lo, x_hi;
          valid_range(g.out_w, g.width, stride, dx, padding, x_lo, x_hi);
          const Real wv = w[((k * g.channels + c) * g.kh + dy) * g.kw + dx];
          if (wv == 0) continue;
          for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
            const Real* row = ic + (oy * stride + dy - padding) * g.width + dx - padding;
            Real* orow = ok + oy * g.out_w;
            if (stride == 1) {
              for (std::size_t ox = x_lo; ox < x_hi; ++ox) orow[ox] += wv * row[ox];
            } else {
              for (std::size_t ox = x_lo; ox < x_hi; ++ox) orow[ox] += wv * row[ox * stride];
            }
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output, std::size_t stride,
                     std::size_t padding, Tensor* grad_input, Tensor* grad_weights) {
  const auto g = conv_geometry(input, weights, stride, padding);
  if (grad_output.shape() != Shape{g.filters, g.out_h, g.out_w})
    throw ShapeError("conv2d gradient shape " + shape_string(grad_output.shape()) + " does not match output");
  const Real* in = input.data();
  const Real* w = weights.data();
  const Real* go = grad_output.data();
  Real* gi = grad_input ? grad_input->data() : nullptr;
  Real* gw = grad_weights ? grad_weights->data() : nullptr;
  for (std::size_t k = 0; k < g.filters; ++k) {
    const Real* gok = go + k * g.out_h * g.out_w;
    for (std::size_t c = 0; c < g.channels; ++c) {
      const Real* ic = in + c * g.height * g.width;
      Real* gic = gi ? gi + c * g.height * g.width : nullptr;
      for (std::size_t dy = 0; dy < g.kh; ++dy) {
        std::size_t y_lo, y_hi;
        valid_range(g.out_h, g.height, stride, dy, padding, y_lo, y_hi);
        for (std::size_t dx = 0; dx < g.kw; ++dx) {
          std::size_t x_lo, x_hi;
          valid_range(g.out_w, g.width, stride, dx, padding, x_lo, x_hi);
          const std::size_t widx = ((k * g.channels + c) * g.kh + dy) * g.kw + dx;
          const Real wv = w[widx];
          Real acc = 0;
          for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
            const std::size_t base = (oy * stride + dy - padding) * g.width + dx - padding;
            const Real* grow = gok + oy * g.out_w;
            if (gw) {
              const Real* row = ic + base;
              for (std::size_t ox = x_lo; ox < x_hi; ++ox) acc += grow[ox] * row[ox * stride];
            }
            if (gic && wv != 0) {
              Real* grow_in = gic + base;
              for (std::size_t ox = x_lo; ox < x_hi; ++ox) grow_in[ox * stride] += wv * grow[ox];
            }
          }
          if (gw) gw[widx] += acc;
        }
      }
    }
  }
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() < 1 || bias.rank() != 1 || bias.size() != x.dim(0))
    throw ShapeError("bias " + shape_string(bias.shape()) + " does not match channels of " + shape_string(x.shape()));
  Tensor out = x;
  const std::size_t per = x.size() / x.dim(0);
  for (std::size_t k = 0; k < x.dim(0); ++k)
    for (std::size_t i = 0; i < per; ++i) out[k * per + i] += bias[k];
  return out;
}

Tensor relu(const Tensor& t) {
  Tensor out = t;
  for (Real& v : out.values()) v = v > 0 ? v : Real(0);
  return out;
}

PoolResult maxpool(const Tensor& t, std::size_t window) {
  if (t.rank() != 3) throw ShapeError("maxpool input must be [K,H,W], got " + shape_string(t.shape()));
  if (window < 1) throw std::invalid_argument("maxpool window must be >= 1");
  const std::size_t channels = t.dim(0), h = t.dim(1), w = t.dim(2);
  if (h % window != 0)
    throw ShapeError("maxpool height " + std::to_string(h) + " not divisible by window " + std::to_string(window));
  if (w % window != 0)
    throw ShapeError("maxpool width " + std::to_string(w) + " not divisible by window " + std::to_string(window));
  const std::size_t oh = h / window, ow = w / window;
  PoolResult r{Tensor({channels, oh, ow}), std::vector<std::size_t>(channels * oh * ow)};
  for (std::size_t k = 0; k < channels; ++k)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (k * h + oy * window) * w + ox * window;
        for (std::size_t dy = 0; dy < window; ++dy)
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx = (k * h + oy * window + dy) * w + ox * window + dx;
            if (t[idx] > t[best]) best = idx;
          }
        const std::size_t o = (k * oh + oy) * ow + ox;
        r.output[o] = t[best];
        r.argmax[o] = best;
      }
  return r;
}

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2 || x.size() != weights.dim(1) || bias.size() != weights.dim(0))
    throw ShapeError("dense: x " + shape_string(x.shape()) + ", W " + shape_string(weights.shape()) + ", b " +
                     shape_string(bias.shape()) + " are incompatible");
  const std::size_t c = weights.dim(0), d = weights.dim(1);
  Tensor out({c});
  for (std::size_t i = 0; i < c; ++i) {
    Real acc = bias[i];
    const Real* row = weights.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
  return out;
}

Tensor softmax(const Tensor& logits) {
  Tensor p = logits;
  const Real m = *std::max_element(p.values().begin(), p.values().end());
  Real z = 0;
  for (Real& v : p.values()) {
    v = std::exp(v - m);
    z += v;
  }
  for (Real& v : p.values()) v /= z;
  return p;
}

Real softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  if (logits.empty()) throw ShapeError("softmax_cross_entropy needs at least one logit");
  if (label >= logits.size())
    throw std::out_of_range("label " + std::to_string(label) + " out of range for " +
                            std::to_string(logits.size()) + " classes");
  const Real m = *std::max_element(logits.values().begin(), logits.values().end());
  Real z = 0;
  for (Real v : logits.values()) z += std::exp(v - m);
  return std::log(z) - (logits[label] - m);
}

Real cosine_similarity(const Tensor& u, const Tensor& v) {
  if (u.size() != v.size())
    throw ShapeError("cosine_similarity dimension mismatch: " + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  Real dot = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  const Real nu = std::sqrt(uu), nv = std::sqrt(vv);
  if (nu < kCosineEpsilon || nv < kCosineEpsilon) return 0;
  return std::clamp(dot / (nu * nv), Real(-1), Real(1));
}

Tensor cosine_similarity_grad(const Tensor& u, const Tensor& v) {
  if (u.size() != v.size())
    throw ShapeError("cosine_similarity dimension mismatch: " + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  Real dot = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  Tensor g = Tensor::zeros_like(u);
  const Real nu = std::sqrt(uu), nv = std::sqrt(vv);
  if (nu < kCosineEpsilon || nv < kCosineEpsilon) return g;
  // d/du (u.v / |u||v|) = v/(|u||v|) - (u.v) u / (|u|^3 |v|)
  const Real a = 1 / (nu * nv);
  const Real b = dot / (uu * nu * nv);
  for (std::size_t i = 0; i < u.size(); ++i) g[i] = a * v[i] - b * u[i];
  return g;
}

Tensor channel_mean(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("channel_mean expects [C,H,W], got " + shape_string(x.shape()));
  const std::size_t c = x.dim(0), n = x.dim(1) * x.dim(2);
  Tensor out({c});
  for (std::size_t k = 0; k < c; ++k) {
    Real s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[k * n + i];
    out[k] = s / static_cast<Real>(n);
  }
  return out;
}

Real sum_squares(const Tensor& t) {
  Real s = 0;
  for (Real v : t.values()) s += v * v;
  return s;
}

}  // namespace nesybicor::kernels
