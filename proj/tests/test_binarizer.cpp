#include <doctest.h>

#include <sstream>

#include "checks.hpp"
#include "toy_data.hpp"

using namespace nesybicor;

TEST_SUITE("binarizer") {

TEST_CASE("feature_norm") {
  CHECK(feature_norm(Tensor({2, 2}, {3, 4, 0, 0})) == 5);
  CHECK(feature_norm(Tensor(Shape{2, 2})) == 0);
  CHECK(feature_norm(Tensor({2, 2}, {1, 1, 1, 1})) == 2);
}

TEST_CASE("thresholds") {
  const auto col = checks::norm_table(3, 1, {1, 2, 3});
  CHECK(compute_thresholds(col, {1, 0})[0] == 2);
  CHECK(compute_thresholds(col, {0, 1})[0] == doctest::Approx(0.816496580927726));
  const auto flat = checks::norm_table(4, 1, {1.5, 1.5, 1.5, 1.5});
  CHECK(compute_thresholds(flat, {0.6, 0.7})[0] == doctest::Approx(0.9));
  CHECK_THROWS(compute_thresholds(checks::norm_table(0, 2, {}), {}));
}

TEST_CASE("strict threshold") {
  const auto t = binarize(checks::norm_table(2, 1, {2.1, 2.0}), Thresholds{2.0});
  CHECK(t.at(0, 0));
  CHECK_FALSE(t.at(1, 0));
  const auto z = binarize(checks::norm_table(3, 1, {0, 0, 0}), Thresholds{0});
  for (std::size_t i = 0; i < 3; ++i) CHECK_FALSE(z.at(i, 0));
}

TEST_CASE("norm table from a model") {
  const Dataset data = toy::halves(2, 32);
  CnnConfig c;
  c.seed = 3;
  CnnModel m = build_model(c);
  Dataset three = data;
  three.samples.resize(3);
  const auto nt = build_norm_table(m, three);
  CHECK(nt.rows == 3);
  CHECK(nt.filters == 16);
  CHECK(build_norm_table(m, three).values == nt.values);

  for (auto& v : m.last_kernels().values()) v = 0;  // every last-layer filter dead, bias 0
  const auto dead = build_norm_table(m, three);
  for (auto v : dead.values) CHECK(v == 0);

  const auto th = compute_thresholds(nt, {});
  const auto bits = binarize_image(build_model(c), three.samples[1].image, th);
  const auto table = binarize(nt, th);
  CHECK(bits == table.row(1));
}

TEST_CASE("binarization csv round trip") {
  const auto t = checks::bit_table(3, 2, {0, 1, 1, 0, 1, 1}, {0, 1, 0}, {"a", "b"});
  std::stringstream ss;
  write_binarization_csv(t, ss);
  CHECK(ss.str().substr(0, ss.str().find('\n')) == "f0,f1,label");
  const auto back = read_binarization_csv(ss);
  CHECK(back.bits == t.bits);
  CHECK(back.labels == t.labels);
  CHECK(back.columns == t.columns);
}

TEST_CASE("oracle and monotonicity property") {
  const auto r = checks::binarizer(200, 3);
  CHECK_MESSAGE(r.pass, r.detail);
}

}  // TEST_SUITE
