#pragma once

// Procedural scenes with exact segmentation masks and a spurious-concept knob.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nesybicor/constraints.hpp"
#include "nesybicor/dataset.hpp"

namespace nesybicor {

enum class ShapeKind { Rectangle, Ellipse, Band };
enum class Texture { Solid, Stripes, Checker, Dots, Gradient };

using Rgb = std::array<std::uint8_t, 3>;

struct Range {
  double lo = 0;
  double hi = 0;
};

/// One concept region. Position is the centre and size the extent, both as
/// fractions of the image side; a Band spans the full width.
struct Placement {
  std::string concept_name;
  ShapeKind shape = ShapeKind::Rectangle;
  Texture texture = Texture::Solid;
  Rgb color{128, 128, 128};
  Rgb color2{0, 0, 0};
  Range x{0.5, 0.5}, y{0.5, 0.5}, width{0.3, 0.3}, height{0.3, 0.3};
  double color_jitter = 0.08;  // per-channel, fraction of 255
  double probability = 1.0;    // chance the region is drawn at all
  int z = 0;                   // higher draws later
};

struct ClassDef {
  std::string name;
  std::vector<Placement> placements;
};

struct SpuriousRule {
  std::string class_name;
  Placement placement;
  double rho_train = 0.95;
  double rho_test = 0.5;
};

struct SceneSpec {
  std::size_t image_size = 32;
  std::vector<std::string> vocabulary{"background"};  // id 0 is background
  Rgb background{120, 120, 120};
  double background_jitter = 0.1;
  double noise = 0.03;  // per-pixel Gaussian, fraction of 255
  std::vector<ClassDef> classes;
  std::vector<SpuriousRule> spurious;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<std::string> class_names() const;
  std::uint8_t concept_id(const std::string& name) const;
};

/// Spurious presence rate of a split: train/validation/matched-test use rho_train, test uses rho_test.
double spurious_rate(const SpuriousRule& rule, Split split);

/// Deterministic in (spec, count, split); image i of class c depends only on its own derived seed.
Dataset generate(const SceneSpec& spec, std::size_t count_per_class, Split split);

SceneSpec parse_scene_spec(const std::string& json_text);
std::string scene_spec_to_json(const SceneSpec& spec);

/// Two-class desert-road/street benchmark with "sky" spurious for desert_road.
SceneSpec benchmark_spec(std::uint64_t seed);
ConstraintSet benchmark_constraints();

struct BenchmarkSuite {
  SceneSpec spec;
  ConstraintSet constraints;
  Dataset train;         // 400 per class
  Dataset validation;    // 100 per class
  Dataset test;          // 200 per class at rho_test
  Dataset matched_test;  // 200 per class at rho_train
};

BenchmarkSuite benchmark_bias_suite(std::uint64_t seed);
/// Same split sizes over a caller-supplied scene.
BenchmarkSuite benchmark_bias_suite(const SceneSpec& spec, const ConstraintSet& constraints);

}  // namespace nesybicor
