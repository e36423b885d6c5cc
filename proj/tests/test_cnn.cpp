#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "nesybicor/cnn.hpp"
#include "toy_data.hpp"

using namespace nesybicor;

TEST_SUITE("cnn") {

TEST_CASE("build_model") {
  CnnConfig c;
  c.seed = 11;
  CHECK(build_model(c).params == build_model(c).params);
  c.seed = 12;
  CnnConfig d;
  d.seed = 11;
  CHECK(build_model(c).params != build_model(d).params);

  CnnConfig k16;
  CHECK(build_model(k16).last_kernels().dim(0) == 16);
  CHECK(k16.feature_map_extent() == 8);

  CnnConfig bad;
  bad.input_size = 30;
  CHECK_THROWS(bad.validate());
  bad = CnnConfig{};
  bad.classes = 1;
  CHECK_THROWS(build_model(bad));
}

TEST_CASE("forward shapes and zero image") {
  CnnConfig c;
  c.seed = 2;
  const CnnModel m = build_model(c);
  const auto out = forward(m, Tensor(Shape{3, 32, 32}));
  CHECK(out.filter_count() == 16);
  CHECK(out.logits.size() == 2);
  CHECK(out.feature_maps.shape() == Shape{16, 8, 8});
  for (auto v : out.feature_maps.values()) CHECK(v == 0);
  CHECK(out.flat_map(3).shape() == Shape{64});
  CHECK_THROWS_AS(forward(m, Tensor(Shape{3, 16, 16})), ShapeError);
}

TEST_CASE("flatten head shape") {
  CnnConfig c;
  c.head = HeadKind::Flatten;
  const CnnModel m = build_model(c);
  CHECK(m.params.back().size() == 2);
  CHECK(m.params[m.params.size() - 2].shape() == Shape{2, 16 * 64});
}

TEST_CASE("predict and argmax") {
  CHECK(argmax(Tensor({2}, {0.2, 0.9})) == 1);
  CHECK(argmax(Tensor({2}, {0.5, 0.5})) == 0);
  CHECK(argmax(Tensor({3}, {1, 3, 3})) == 1);
}

TEST_CASE("training separates a toy set and is reproducible") {
  const Dataset data = toy::halves(50);
  TrainConfig tc;
  tc.epochs = 30;
  tc.learning_rate = 5e-3;
  tc.seed = 4;
  CnnModel a = build_model(toy::small_config(4));
  const auto hist = train(a, data, tc);
  CHECK(hist.size() == 30);
  CHECK(hist.back().train_accuracy >= 0.95);

  CnnModel b = build_model(toy::small_config(4));
  train(b, data, tc, AuxLoss{});
  CHECK(a.params == b.params);
  CHECK(evaluate(a, data).accuracy >= 0.95);
}

TEST_CASE("class weights scale the per-example loss") {
  const Dataset data = toy::halves(1);
  const CnnModel m = build_model(toy::small_config(5));
  TrainConfig plain;
  plain.l2 = 0;
  TrainConfig weighted = plain;
  weighted.class_weights = {2, 1};
  const std::vector<std::size_t> only0{0}, only1{1};
  CHECK(batch_objective(m, data, only0, weighted).ce ==
        doctest::Approx(2 * batch_objective(m, data, only0, plain).ce));
  CHECK(batch_objective(m, data, only1, weighted).ce == doctest::Approx(batch_objective(m, data, only1, plain).ce));
  CHECK_THROWS(weighted.validate(3));
}

TEST_CASE("objective decomposes into ce, aux and l2") {
  const Dataset data = toy::halves(3);
  const CnnModel m = build_model(toy::small_config(6));
  TrainConfig tc;
  tc.l2 = 1e-3;
  AuxLoss aux = [](const Var& maps, const Sample& s) { return scale(sum_squares(maps), 0.01 * (s.label + 1)); };
  std::vector<std::size_t> batch(data.size());
  std::iota(batch.begin(), batch.end(), 0);
  const auto full = batch_objective(m, data, batch, tc, aux);
  const auto ce_only = batch_objective(m, data, batch, tc);
  CHECK(full.total == doctest::Approx(full.ce + full.aux + full.l2).epsilon(1e-14));
  CHECK(ce_only.ce == doctest::Approx(full.ce).epsilon(1e-14));
  std::vector<Var> ps;
  for (const auto& p : m.params) ps.push_back(constant(p));
  Real aux_sum = 0;
  for (const auto& s : data.samples) aux_sum += aux(forward_graph(m.config, ps, constant(s.image)).feature_maps, s).item();
  CHECK(full.aux == doctest::Approx(aux_sum / static_cast<Real>(data.size())).epsilon(1e-14));
  CHECK(full.l2 == doctest::Approx(l2_penalty(m, 1e-3)));
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "nesybicor_ckpt_test";
  std::filesystem::create_directories(dir);
  CnnConfig c;
  c.seed = 8;
  c.filters = 5;
  c.head = HeadKind::Flatten;
  const CnnModel m = build_model(c);
  save_checkpoint(m, dir / "a.ckpt");
  const CnnModel r = load_checkpoint(dir / "a.ckpt");
  CHECK(r.config == m.config);
  REQUIRE(r.params.size() == m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i)
    for (std::size_t j = 0; j < m.params[i].size(); ++j)
      CHECK(r.params[i][j] == static_cast<Real>(static_cast<float>(m.params[i][j])));
  save_checkpoint(r, dir / "b.ckpt");
  CHECK(load_checkpoint(dir / "b.ckpt").params == r.params);

  {
    std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
    bad << "NSBX";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), CheckpointError);
  std::filesystem::resize_file(dir / "b.ckpt", 40);
  CHECK_THROWS_AS(load_checkpoint(dir / "b.ckpt"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
