#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nesybicor/scenegen.hpp"

#include "toy_data.hpp"

using namespace nesybicor;

namespace {

bool contains(const Sample& s, std::uint8_t id) {
  return std::find(s.mask->ids.begin(), s.mask->ids.end(), id) != s.mask->ids.end();
}

std::size_t count_with(const Dataset& d, std::size_t label, std::uint8_t id) {
  std::size_t n = 0;
  for (const auto& s : d.samples) n += s.label == label && contains(s, id);
  return n;
}

SceneSpec with_rho(double train, double test) {
  SceneSpec spec = benchmark_spec(3);
  spec.spurious[0].rho_train = train;
  spec.spurious[0].rho_test = test;
  return spec;
}

}  // namespace

TEST_SUITE("scenegen") {

TEST_CASE("spurious rate extremes") {
  const auto spec = with_rho(1.0, 0.0);
  const auto sky = spec.concept_id("sky");
  const auto train = generate(spec, 30, Split::Train);
  CHECK(count_with(train, 0, sky) == 30);
  CHECK(count_with(train, 1, sky) == 0);
  CHECK(count_with(generate(spec, 30, Split::Test), 0, sky) == 0);
  CHECK(count_with(generate(with_rho(0, 0), 30, Split::Train), 0, sky) == 0);
  CHECK(spurious_rate(spec.spurious[0], Split::MatchedTest) == 1.0);
  CHECK(spurious_rate(spec.spurious[0], Split::Validation) == 1.0);
}

TEST_CASE("generation is deterministic") {
  const auto spec = benchmark_spec(5);
  const auto a = generate(spec, 6, Split::Train), b = generate(spec, 6, Split::Train);
  REQUIRE(a.size() == 12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(toy::vals(a.samples[i].image) == toy::vals(b.samples[i].image));
    CHECK(*a.samples[i].mask == *b.samples[i].mask);
    CHECK(a.samples[i].id == b.samples[i].id);
  }
  // image i does not depend on how many images were asked for
  const auto more = generate(spec, 8, Split::Train);
  CHECK(toy::vals(more.samples[0].image) == toy::vals(a.samples[0].image));
  CHECK(toy::vals(generate(benchmark_spec(6), 6, Split::Train).samples[0].image) != toy::vals(a.samples[0].image));
  CHECK(toy::vals(generate(spec, 6, Split::Test).samples[0].image) != toy::vals(a.samples[0].image));
}

TEST_CASE("masks align with images") {
  const auto spec = benchmark_spec(2);
  const auto d = generate(spec, 10, Split::Train);
  for (const auto& s : d.samples) {
    REQUIRE(s.mask.has_value());
    CHECK(s.mask->height == s.image.dim(1));
    CHECK(s.mask->width == s.image.dim(2));
    CHECK(s.image.dim(0) == 3);
    for (auto id : s.mask->ids) CHECK(id < spec.vocabulary.size());
    for (auto v : s.image.values()) CHECK((v >= 0 && v <= 1));
  }
  CHECK(d.vocabulary == spec.vocabulary);
  CHECK(d.class_names == spec.class_names());
}

TEST_CASE("benchmark suite") {
  const auto suite = benchmark_bias_suite(1);
  CHECK(suite.train.size() == 800);
  CHECK(suite.validation.size() == 200);
  CHECK(suite.test.size() == 400);
  CHECK(suite.matched_test.size() == 400);
  const auto sky = suite.spec.concept_id("sky"), sand = suite.spec.concept_id("sand");
  const auto a = suite.train.class_index("desert_road");

  // 380 expected, binomial sd about 4.4
  const auto with_sky = count_with(suite.train, a, sky);
  CHECK(with_sky >= 367);
  CHECK(with_sky <= 393);
  CHECK(count_with(suite.train, a, sand) == 400);
  CHECK(count_with(suite.test, a, sand) == 200);

  const double test_rate = static_cast<double>(count_with(suite.test, a, sky)) / 200.0;
  CHECK(test_rate >= 0.4);
  CHECK(test_rate <= 0.6);
  const double matched_rate = static_cast<double>(count_with(suite.matched_test, a, sky)) / 200.0;
  CHECK(matched_rate >= 0.9);
  CHECK(suite.constraints.is_undesired("desert_road", "sky"));
}

TEST_CASE("spec json round trip and validation") {
  const auto spec = benchmark_spec(4);
  const auto back = parse_scene_spec(scene_spec_to_json(spec));
  CHECK(scene_spec_to_json(back) == scene_spec_to_json(spec));
  CHECK(toy::vals(generate(back, 2, Split::Train).samples[1].image) == toy::vals(generate(spec, 2, Split::Train).samples[1].image));

  SceneSpec bad = spec;
  bad.classes[0].placements[0].concept_name = "lava";
  CHECK_THROWS(bad.validate());
  bad = spec;
  bad.spurious[0].rho_train = 1.5;
  CHECK_THROWS(bad.validate());
  CHECK_THROWS(parse_scene_spec(R"({"image_size": 32, "classes": "no"})"));
}

}  // TEST_SUITE
