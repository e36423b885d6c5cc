#include <doctest.h>

#include "checks.hpp"
#include "nesybicor/bias.hpp"
#include "toy_data.hpp"

using namespace nesybicor;

namespace {

ConceptVector vec(std::vector<Real> v, std::string concept_name = "sky") {
  const std::size_t n = v.size();
  return ConceptVector{Tensor({n}, std::move(v)), std::move(concept_name), "c", {}};
}

Var maps(std::size_t k, std::vector<Real> v) {
  const std::size_t w = v.size() / k;
  return constant(Tensor({k, 1, w}, std::move(v)));
}

// filter 0 copies x, filter 1 copies 2x: one map per 2x2 image
CnnModel two_copy_model() {
  CnnConfig c;
  c.input_size = 2;
  c.channels = 1;
  c.blocks = {};
  c.filters = 2;
  c.classes = 2;
  CnnModel m = build_model(c);
  for (auto& v : m.last_kernels().values()) v = 0;
  m.last_kernels()[4] = 1;
  m.last_kernels()[9 + 4] = 2;
  for (auto& v : m.last_bias().values()) v = 0;
  return m;
}

Dataset two_images(std::vector<Real> a, std::vector<Real> b) {
  Dataset d;
  d.class_names = {"c", "d"};
  d.vocabulary = {"background"};
  d.samples.push_back({"a", Tensor({1, 2, 2}, std::move(a)), 0, std::nullopt});
  d.samples.push_back({"b", Tensor({1, 2, 2}, std::move(b)), 1, std::nullopt});
  return d;
}

}  // namespace

TEST_SUITE("bias") {

TEST_CASE("filter_repr_vector") {
  const CnnModel m = two_copy_model();
  const Dataset d = two_images({2, 0, 0, 0}, {0, 2, 0, 0});
  const auto norms = build_norm_table(m, d);
  CHECK(toy::vals(filter_repr_vector(m, d, norms, 0, 10)) == std::vector<Real>{1, 1, 0, 0});
  CHECK(toy::vals(filter_repr_vector(m, d, norms, 1, 2)) == std::vector<Real>{2, 2, 0, 0});

  Dataset one = d;
  one.samples.resize(1);
  CHECK(toy::vals(filter_repr_vector(m, one, build_norm_table(m, one), 0)) == std::vector<Real>{2, 0, 0, 0});
  const Dataset same = two_images({1, 2, 3, 4}, {1, 2, 3, 4});
  CHECK(toy::vals(filter_repr_vector(m, same, build_norm_table(m, same), 0)) == std::vector<Real>{1, 2, 3, 4});
  // only the top image counts when top = 1
  CHECK(toy::vals(filter_repr_vector(m, d, norms, 0, 1)) == std::vector<Real>{2, 0, 0, 0});
}

TEST_CASE("positively_associated") {
  CHECK(positively_associated(parse_ruleset("target(X,'c') :- sky1(X).\n"), "c") == std::vector<std::string>{"sky1"});
  CHECK(positively_associated(parse_ruleset("target(X,'c') :- not road1(X).\n"), "c").empty());
  const auto rs = parse_ruleset(
      "target(X,'c') :- sky1(X), not ab1(X).\nab1(X) :- road2(X).\ntarget(X,'d') :- road1(X).\n");
  CHECK(positively_associated(rs, "c") == std::vector<std::string>{"sky1"});
  CHECK(positively_associated(rs, "d") == std::vector<std::string>{"road1"});
  CHECK(positively_associated(rs, "e").empty());
}

TEST_CASE("concept vectors and banks") {
  const Dataset data = toy::bands(10);
  const CnnModel m = toy::copy_model({0, 0, 1});
  const auto norms = build_norm_table(m, data);
  const RuleSet rs = parse_ruleset(
      "target(X,'desert') :- f0(X), f1(X), not ab1(X).\nab1(X) :- f2(X).\ntarget(X,'street') :- f2(X).\n");
  const LabelMap labels = label_all(m, data, norms, rs, LabelParams{});
  REQUIRE(labels.filters.at("f1").name == "sky2");

  const auto sky = concept_vector("sky", "desert", rs, labels, m, data, norms);
  REQUIRE(sky.has_value());
  // two identical filters: the mean is either one's vector
  CHECK(toy::vals(sky->values) == toy::vals(filter_repr_vector(m, data, norms, 0)));
  CHECK(sky->filters.size() == 2);
  CHECK_FALSE(concept_vector("road", "desert", rs, labels, m, data, norms).has_value());
  const auto road = concept_vector("road", "street", rs, labels, m, data, norms);
  REQUIRE(road.has_value());
  CHECK(toy::vals(road->values) == toy::vals(filter_repr_vector(m, data, norms, 2)));

  CHECK(build_concept_bank(ConstraintSet{}, rs, labels, m, data, norms).empty());
  ConstraintSet cs;
  cs.classes["desert"] = {{"sky"}, {"sand"}};
  const auto bank = build_concept_bank(cs, rs, labels, m, data, norms);
  REQUIRE(bank.find("desert") != nullptr);
  CHECK(bank.find("desert")->undesired.size() == 1);
  CHECK(bank.find("desert")->desired.empty());
  CHECK(bank.find("street") == nullptr);
  CHECK(bank.vector_count() == 1);
}

TEST_CASE("semantic similarity loss") {
  const LossParams p{0.05, 0.001};
  ClassBank empty;
  CHECK(semantic_similarity_loss(maps(1, {1, 0}), empty, p).item() == 0);

  ClassBank bank;
  bank.undesired.push_back(vec({0, 1}));
  bank.desired.push_back(vec({1, 0}, "sand"));
  CHECK(semantic_similarity_loss(maps(1, {1, 0}), bank, p).item() == doctest::Approx(-0.001).epsilon(1e-12));

  ClassBank twice = bank;
  twice.undesired.push_back(vec({0, 1}));
  const Var x = maps(1, {0.6, 0.8});
  CHECK(semantic_similarity_loss(x, twice, p).item() ==
        doctest::Approx(0.05 * 0.8 * 2 - 0.001 * 0.6).epsilon(1e-12));

  // cosine ignores the scale of the map
  CHECK(semantic_similarity_loss(maps(1, {3, 4}), bank, p).item() ==
        doctest::Approx(semantic_similarity_loss(maps(1, {30, 40}), bank, p).item()).epsilon(1e-12));

  // sums over filters
  CHECK(semantic_similarity_loss(maps(2, {1, 0, 0, 1}), bank, p).item() == doctest::Approx(-0.001 + 0.05));

  ClassBank wrong;
  wrong.undesired.push_back(vec({1, 2, 3}));
  CHECK_THROWS_AS(semantic_similarity_loss(maps(1, {1, 0}), wrong, p), ShapeError);
  LossParams neg{-1, 0};
  CHECK_THROWS(neg.validate());
}

TEST_CASE("recalibrate") {
  ConceptBank old_bank, new_bank;
  old_bank.classes["c"].undesired.push_back(vec({0, 2}));
  new_bank.classes["c"].undesired.push_back(vec({2, 0}));
  CHECK(toy::vals(recalibrate(old_bank, new_bank).classes.at("c").undesired[0].values) == std::vector<Real>{1, 1});
  CHECK(toy::vals(recalibrate(old_bank, old_bank).classes.at("c").undesired[0].values) == std::vector<Real>{0, 2});

  new_bank.classes["c"].undesired.push_back(vec({5, 5}, "road"));
  new_bank.classes["d"].desired.push_back(vec({1, 1}, "sand"));
  old_bank.classes["c"].desired.push_back(vec({3, 3}, "sand"));
  const auto r = recalibrate(old_bank, new_bank);
  CHECK(r.classes.at("c").undesired.size() == 2);
  CHECK(r.classes.at("c").undesired[1].concept_name == "road");
  CHECK(toy::vals(r.classes.at("c").desired[0].values) == std::vector<Real>{3, 3});
  CHECK(r.classes.at("d").desired.size() == 1);
  CHECK(r.vector_count() == 4);

  ConceptBank bad;
  bad.classes["c"].undesired.push_back(vec({1, 2, 3}));
  CHECK_THROWS_AS(recalibrate(old_bank, bad), ShapeError);
}

TEST_CASE("zero weights give plain retraining") {
  const Dataset data = toy::halves(10, 8, 3);
  const CnnModel start = build_model(toy::small_config(9));
  TrainConfig tc;
  tc.learning_rate = 5e-3;
  tc.seed = 9;
  CorrectionConfig cc;
  cc.epochs = 4;
  cc.recalibrate_every = 2;
  cc.loss = {0, 0};
  ConstraintSet cs;
  cs.classes["left"] = {{"background"}, {"blob"}};
  ExtractionParams ep;
  ep.labels.ignore_background = false;
  const auto corrected = correct_bias(start, data, cs, cc, ep, tc);

  CnnModel plain = start;
  tc.epochs = 4;
  train(plain, data, tc);
  CHECK(corrected.model.params == plain.params);
  CHECK(corrected.snapshots.front().epoch == 0);
  CHECK(corrected.snapshots.back().epoch == 4);
  CHECK(corrected.epochs.size() == 4);
}

TEST_CASE("correction config validation") {
  CorrectionConfig c;
  c.recalibrate_every = 0;
  CHECK_THROWS(c.validate());
  c = CorrectionConfig{};
  c.epochs = 2;
  c.recalibrate_every = 5;
  CHECK_THROWS(c.validate());
}

}  // TEST_SUITE
