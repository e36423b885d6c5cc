#pragma once

#include <string>

#include "nesybicor/cnn.hpp"
#include "nesybicor/dataset.hpp"
#include "nesybicor/rng.hpp"

namespace toy {

using namespace nesybicor;

/// Two linearly separable classes: a bright left half (0) or right half (1).
inline Dataset halves(std::size_t per_class, std::size_t size = 8, std::uint64_t seed = 1) {
  Dataset d;
  d.class_names = {"left", "right"};
  d.vocabulary = {"background", "blob"};
  Rng rng(seed);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      Sample s;
      s.id = d.class_names[c] + std::to_string(i);
      s.label = c;
      s.image = Tensor(Shape{3, size, size});
      SegMask m{size, size, std::vector<std::uint8_t>(size * size, 0)};
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
          const bool on = c == 0 ? x < size / 2 : x >= size / 2;
          if (on) m.ids[y * size + x] = 1;
          for (std::size_t ch = 0; ch < 3; ++ch)
            s.image[(ch * size + y) * size + x] = (on ? 0.8 : 0.2) + 0.05 * rng.normal();
        }
      s.mask = m;
      d.samples.push_back(std::move(s));
    }
  return d;
}

inline CnnConfig small_config(std::uint64_t seed = 1) {
  CnnConfig c;
  c.input_size = 8;
  c.blocks = {4};
  c.filters = 4;
  c.classes = 2;
  c.seed = seed;
  return c;
}

/// 8x8 scenes: sky on rows 0-3, road on rows 4-7. Channel 0 lights the sky,
/// channel 1 the road, channel 2 all of the sky plus 28 road pixels. Each image
/// has its own brightness so norms are distinct.
inline Dataset bands(std::size_t count, std::uint64_t seed = 1) {
  Dataset d;
  d.class_names = {"desert", "street"};
  d.vocabulary = {"background", "sky", "road"};
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.id = "scene" + std::to_string(i);
    s.label = i % 2;
    s.image = Tensor(Shape{3, 8, 8});
    SegMask m{8, 8, std::vector<std::uint8_t>(64, 0)};
    const double amp = rng.uniform(0.5, 1.0);
    for (std::size_t p = 0; p < 64; ++p) {
      m.ids[p] = p < 32 ? 1 : 2;
      s.image[p] = p < 32 ? amp : 0;
      s.image[64 + p] = p < 32 ? 0 : amp;
      s.image[128 + p] = p < 60 ? amp : 0;
    }
    s.mask = m;
    d.samples.push_back(std::move(s));
  }
  return d;
}

/// Last-layer-only model whose filter k copies input channel channel_of[k].
inline CnnModel copy_model(const std::vector<std::size_t>& channel_of) {
  CnnConfig c;
  c.input_size = 8;
  c.channels = 3;
  c.blocks = {};
  c.filters = channel_of.size();
  c.classes = 2;
  c.seed = 1;
  CnnModel m = build_model(c);
  Tensor& ker = m.last_kernels();
  for (auto& v : ker.values()) v = 0;
  for (std::size_t k = 0; k < channel_of.size(); ++k) ker[(k * 3 + channel_of[k]) * 9 + 4] = 1;
  for (auto& v : m.last_bias().values()) v = 0;
  return m;
}

}  // namespace toy

namespace toy {
inline std::vector<nesybicor::Real> vals(const nesybicor::Tensor& t) { return {t.values().begin(), t.values().end()}; }
}  // namespace toy
