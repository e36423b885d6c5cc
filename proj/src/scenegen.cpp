#include "nesybicor/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"
#include "nesybicor/rng.hpp"

namespace nesybicor {

namespace {

void check_range(const Range& r, const std::string& what) {
  if (!(std::isfinite(r.lo) && std::isfinite(r.hi)) || r.lo > r.hi)
    throw std::invalid_argument("scene spec: bad range for " + what);
}

void check_placement(const Placement& p, const SceneSpec& spec, const std::string& where) {
  if (std::find(spec.vocabulary.begin() + 1, spec.vocabulary.end(), p.concept_name) == spec.vocabulary.end())
    throw std::invalid_argument("scene spec: concept '" + p.concept_name + "' in " + where +
                                " is not in the vocabulary");
  check_range(p.x, where + " x");
  check_range(p.y, where + " y");
  check_range(p.width, where + " width");
  check_range(p.height, where + " height");
  if (p.width.lo <= 0 || p.height.lo <= 0) throw std::invalid_argument("scene spec: " + where + " has empty extent");
  if (p.probability < 0 || p.probability > 1) throw std::invalid_argument("scene spec: probability outside [0,1] in " + where);
}

std::size_t split_index(Split s) {
  switch (s) {
    case Split::Train: return 1;
    case Split::Validation: return 2;
    case Split::Test: return 3;
    case Split::MatchedTest: return 4;
  }
  return 0;
}

Rgb jitter(const Rgb& c, double amount, Rng& rng) {
  Rgb out;
  for (int i = 0; i < 3; ++i) {
    const double v = c[i] + rng.uniform(-amount, amount) * 255.0;
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

struct Canvas {
  std::size_t size;
  std::vector<double> rgb;  // [3][S][S]
  std::vector<std::uint8_t> ids;
};

void draw(Canvas& cv, const Placement& p, std::uint8_t id, Rng& rng) {
  const double cx = rng.uniform(p.x.lo, p.x.hi), cy = rng.uniform(p.y.lo, p.y.hi);
  const double w = rng.uniform(p.width.lo, p.width.hi), h = rng.uniform(p.height.lo, p.height.hi);
  const Rgb c1 = jitter(p.color, p.color_jitter, rng), c2 = jitter(p.color2, p.color_jitter, rng);
  const auto offset = static_cast<std::size_t>(rng.uniform_int(0, 3));
  const std::size_t S = cv.size;
  const double top = cy - h / 2;
  for (std::size_t y = 0; y < S; ++y) {
    const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(S);
    for (std::size_t x = 0; x < S; ++x) {
      const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(S);
      bool inside = false;
      switch (p.shape) {
        case ShapeKind::Rectangle: inside = std::abs(px - cx) <= w / 2 && std::abs(py - cy) <= h / 2; break;
        case ShapeKind::Ellipse: {
          const double dx = (px - cx) / (w / 2), dy = (py - cy) / (h / 2);
          inside = dx * dx + dy * dy <= 1;
          break;
        }
        case ShapeKind::Band: inside = std::abs(py - cy) <= h / 2; break;
      }
      if (!inside) continue;
      double t = 0;  // weight of color2
      switch (p.texture) {
        case Texture::Solid: break;
        case Texture::Stripes: t = ((x + offset) % 4) < 2 ? 0 : 1; break;
        case Texture::Checker: t = ((x + offset) / 2 + y / 2) % 2; break;
        case Texture::Dots: t = ((x + offset) % 3 == 1 && (y + offset) % 3 == 1) ? 1 : 0; break;
        case Texture::Gradient: t = std::clamp((py - top) / h, 0.0, 1.0); break;
      }
      for (std::size_t ch = 0; ch < 3; ++ch)
        cv.rgb[(ch * S + y) * S + x] = c1[ch] * (1 - t) + c2[ch] * t;
      cv.ids[y * S + x] = id;
    }
  }
}

}  // namespace

void SceneSpec::validate() const {
  if (image_size < 4) throw std::invalid_argument("scene spec: image size must be >= 4");
  if (vocabulary.empty()) throw std::invalid_argument("scene spec: vocabulary must declare background at id 0");
  if (vocabulary.size() > 255) throw std::invalid_argument("scene spec: at most 255 concepts");
  if (classes.empty()) throw std::invalid_argument("scene spec: no classes");
  for (const auto& c : classes)
    for (const auto& p : c.placements) check_placement(p, *this, "class '" + c.name + "'");
  for (const auto& s : spurious) {
    if (s.rho_train < 0 || s.rho_train > 1 || s.rho_test < 0 || s.rho_test > 1)
      throw std::invalid_argument("scene spec: spurious rates must lie in [0,1]");
    const auto names = class_names();
    if (std::find(names.begin(), names.end(), s.class_name) == names.end())
      throw std::invalid_argument("scene spec: spurious rule names unknown class '" + s.class_name + "'");
    check_placement(s.placement, *this, "spurious rule for '" + s.class_name + "'");
  }
}

std::vector<std::string> SceneSpec::class_names() const {
  std::vector<std::string> out;
  for (const auto& c : classes) out.push_back(c.name);
  return out;
}

std::uint8_t SceneSpec::concept_id(const std::string& name) const {
  auto it = std::find(vocabulary.begin(), vocabulary.end(), name);
  if (it == vocabulary.end()) throw std::invalid_argument("concept '" + name + "' is not in the vocabulary");
  return static_cast<std::uint8_t>(it - vocabulary.begin());
}

double spurious_rate(const SpuriousRule& rule, Split split) {
  return split == Split::Test ? rule.rho_test : rule.rho_train;
}

Dataset generate(const SceneSpec& spec, std::size_t count_per_class, Split split) {
  spec.validate();
  Dataset out;
  out.class_names = spec.class_names();
  out.vocabulary = spec.vocabulary;
  out.split = split;
  const std::size_t S = spec.image_size;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const auto& def = spec.classes[c];
    for (std::size_t i = 0; i < count_per_class; ++i) {
      Rng rng(derive_seed(spec.seed, split_index(split), c, i));
      Canvas cv{S, std::vector<double>(3 * S * S), std::vector<std::uint8_t>(S * S, 0)};
      const Rgb bg = jitter(spec.background, spec.background_jitter, rng);
      for (std::size_t ch = 0; ch < 3; ++ch)
        std::fill_n(cv.rgb.begin() + static_cast<std::ptrdiff_t>(ch * S * S), S * S, static_cast<double>(bg[ch]));

      // Decide presence first, then paint in z order.
      std::vector<const Placement*> layers;
      for (const auto& p : def.placements)
        if (rng.bernoulli(p.probability)) layers.push_back(&p);
      for (const auto& s : spec.spurious)
        if (s.class_name == def.name && rng.bernoulli(spurious_rate(s, split))) layers.push_back(&s.placement);
      std::stable_sort(layers.begin(), layers.end(), [](auto a, auto b) { return a->z < b->z; });
      for (const auto* p : layers) draw(cv, *p, spec.concept_id(p->concept_name), rng);

      Sample s;
      char id[32];
      std::snprintf(id, sizeof id, "%04zu", i);
      s.id = def.name + "_" + id;
      s.label = c;
      s.image = Tensor({3, S, S});
      for (std::size_t k = 0; k < cv.rgb.size(); ++k) {
        const double v = cv.rgb[k] + rng.normal() * spec.noise * 255.0;
        s.image[k] = static_cast<Real>(std::clamp(std::lround(v), 0L, 255L)) / 255.0;
      }
      s.mask = SegMask{S, S, std::move(cv.ids)};
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

// JSON mapping

namespace {

using nlohmann::json;

const std::vector<std::pair<ShapeKind, const char*>> kShapes{
    {ShapeKind::Rectangle, "rectangle"}, {ShapeKind::Ellipse, "ellipse"}, {ShapeKind::Band, "band"}};
const std::vector<std::pair<Texture, const char*>> kTextures{{Texture::Solid, "solid"},
                                                             {Texture::Stripes, "stripes"},
                                                             {Texture::Checker, "checker"},
                                                             {Texture::Dots, "dots"},
                                                             {Texture::Gradient, "gradient"}};

template <class E>
E enum_from(const std::vector<std::pair<E, const char*>>& table, const std::string& s, const char* what) {
  for (const auto& [e, name] : table)
    if (s == name) return e;
  throw std::invalid_argument(std::string("scene spec: unknown ") + what + " '" + s + "'");
}

template <class E>
std::string enum_to(const std::vector<std::pair<E, const char*>>& table, E e) {
  for (const auto& [v, name] : table)
    if (v == e) return name;
  return "?";
}

Range range_from(const json& j) {
  if (j.is_number()) return {j.get<double>(), j.get<double>()};
  if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
  throw std::invalid_argument("scene spec: a range is a number or [lo, hi]");
}

Rgb rgb_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("scene spec: a colour is [r, g, b]");
  Rgb c;
  for (int i = 0; i < 3; ++i) {
    const int v = j[i].get<int>();
    if (v < 0 || v > 255) throw std::invalid_argument("scene spec: colour component outside [0,255]");
    c[i] = static_cast<std::uint8_t>(v);
  }
  return c;
}

Placement placement_from(const json& j) {
  Placement p;
  p.concept_name = j.at("concept").get<std::string>();
  if (j.contains("shape")) p.shape = enum_from(kShapes, j["shape"].get<std::string>(), "shape");
  if (j.contains("texture")) p.texture = enum_from(kTextures, j["texture"].get<std::string>(), "texture");
  if (j.contains("color")) p.color = rgb_from(j["color"]);
  if (j.contains("color2")) p.color2 = rgb_from(j["color2"]);
  if (j.contains("x")) p.x = range_from(j["x"]);
  if (j.contains("y")) p.y = range_from(j["y"]);
  if (j.contains("width")) p.width = range_from(j["width"]);
  if (j.contains("height")) p.height = range_from(j["height"]);
  p.color_jitter = j.value("color_jitter", p.color_jitter);
  p.probability = j.value("probability", p.probability);
  p.z = j.value("z", p.z);
  return p;
}

json placement_to(const Placement& p) {
  auto r = [](const Range& x) { return json::array({x.lo, x.hi}); };
  return {{"concept", p.concept_name},
          {"shape", enum_to(kShapes, p.shape)},
          {"texture", enum_to(kTextures, p.texture)},
          {"color", p.color},
          {"color2", p.color2},
          {"x", r(p.x)},
          {"y", r(p.y)},
          {"width", r(p.width)},
          {"height", r(p.height)},
          {"color_jitter", p.color_jitter},
          {"probability", p.probability},
          {"z", p.z}};
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& json_text) {
  SceneSpec spec;
  try {
    const json j = json::parse(json_text);
    spec.image_size = j.value("image_size", spec.image_size);
    if (j.contains("vocabulary")) spec.vocabulary = j["vocabulary"].get<std::vector<std::string>>();
    if (j.contains("background")) spec.background = rgb_from(j["background"]);
    spec.background_jitter = j.value("background_jitter", spec.background_jitter);
    spec.noise = j.value("noise", spec.noise);
    spec.seed = j.value("seed", spec.seed);
    for (const auto& c : j.at("classes")) {
      ClassDef def;
      def.name = c.at("name").get<std::string>();
      for (const auto& p : c.value("placements", json::array())) def.placements.push_back(placement_from(p));
      spec.classes.push_back(std::move(def));
    }
    for (const auto& s : j.value("spurious", json::array())) {
      SpuriousRule rule;
      rule.class_name = s.at("class").get<std::string>();
      rule.placement = placement_from(s.at("placement"));
      rule.rho_train = s.value("rho_train", rule.rho_train);
      rule.rho_test = s.value("rho_test", rule.rho_test);
      spec.spurious.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scene spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string scene_spec_to_json(const SceneSpec& spec) {
  json j;
  j["image_size"] = spec.image_size;
  j["vocabulary"] = spec.vocabulary;
  j["background"] = spec.background;
  j["background_jitter"] = spec.background_jitter;
  j["noise"] = spec.noise;
  j["seed"] = spec.seed;
  j["classes"] = json::array();
  for (const auto& c : spec.classes) {
    json pl = json::array();
    for (const auto& p : c.placements) pl.push_back(placement_to(p));
    j["classes"].push_back({{"name", c.name}, {"placements", pl}});
  }
  j["spurious"] = json::array();
  for (const auto& s : spec.spurious)
    j["spurious"].push_back({{"class", s.class_name},
                             {"placement", placement_to(s.placement)},
                             {"rho_train", s.rho_train},
                             {"rho_test", s.rho_test}});
  return j.dump(2) + "\n";
}

SceneSpec benchmark_spec(std::uint64_t seed) {
  SceneSpec spec;
  spec.seed = seed;
  spec.image_size = 32;
  spec.vocabulary = {"background", "sky", "sand", "building", "road"};
  spec.background = {150, 140, 120};

  Placement sand;
  sand.concept_name = "sand";
  sand.shape = ShapeKind::Ellipse;
  sand.texture = Texture::Dots;
  sand.color = {218, 185, 85};
  sand.color2 = {183, 142, 58};
  sand.x = {0.3, 0.7};
  sand.y = {0.6, 0.8};
  sand.width = {0.4, 0.6};
  sand.height = {0.25, 0.35};
  sand.z = 1;

  Placement sky;
  sky.concept_name = "sky";
  sky.shape = ShapeKind::Band;
  sky.texture = Texture::Solid;
  sky.color = {100, 160, 235};
  sky.color2 = {170, 205, 250};
  sky.y = {0.14, 0.2};
  sky.height = {0.28, 0.36};
  sky.z = 0;

  Placement building;
  building.concept_name = "building";
  building.shape = ShapeKind::Rectangle;
  building.texture = Texture::Checker;
  building.color = {110, 110, 120};
  building.color2 = {60, 60, 72};
  building.x = {0.3, 0.7};
  building.y = {0.35, 0.55};
  building.width = {0.3, 0.5};
  building.height = {0.3, 0.5};
  building.probability = 0.6;
  building.z = 1;

  Placement road;
  road.concept_name = "road";
  road.shape = ShapeKind::Band;
  road.texture = Texture::Solid;
  road.color = {60, 60, 65};
  road.y = {0.85, 0.92};
  road.height = {0.12, 0.2};
  road.probability = 0.5;
  road.z = 0;

  // about a fifth of street scenes are empty, so sand has to be learned to tell them apart
  spec.classes = {{"desert_road", {sand}}, {"street", {building, road}}};
  spec.spurious = {{"desert_road", sky, 0.95, 0.5}};
  return spec;
}

ConstraintSet benchmark_constraints() {
  ConstraintSet c;
  c.classes["desert_road"] = {{"sky"}, {"sand"}};
  c.classes["street"] = {{"sky"}, {"building", "road"}};
  return c;
}

BenchmarkSuite benchmark_bias_suite(std::uint64_t seed) {
  return benchmark_bias_suite(benchmark_spec(seed), benchmark_constraints());
}

BenchmarkSuite benchmark_bias_suite(const SceneSpec& spec, const ConstraintSet& constraints) {
  BenchmarkSuite suite;
  suite.spec = spec;
  suite.constraints = constraints;
  suite.train = generate(suite.spec, 400, Split::Train);
  suite.validation = generate(suite.spec, 100, Split::Validation);
  suite.test = generate(suite.spec, 200, Split::Test);
  suite.matched_test = generate(suite.spec, 200, Split::MatchedTest);
  return suite;
}

}  // namespace nesybicor
