#include <doctest.h>

#include <sstream>

#include "checks.hpp"
#include "nesybicor/constraints.hpp"

using namespace nesybicor;

namespace {
std::set<std::string> path(const std::string& text, std::vector<std::string> cols, std::vector<std::uint8_t> bits) {
  return decision_path(parse_ruleset(text), cols, bits);
}
}  // namespace

TEST_SUITE("evaluator") {

TEST_CASE("decision_path") {
  CHECK(path("target(X,'c') :- ground1_road1(X).\n", {"ground1_road1"}, {1}) == std::set<std::string>{"ground1_road1"});
  CHECK(path("target(X,'c') :- not road1(X).\n", {"road1"}, {0}).empty());
  CHECK(path("target(X,'c') :- sky1(X), not ab1(X).\nab1(X) :- road2(X).\n", {"sky1", "road2"}, {1, 0}) ==
        std::set<std::string>{"sky1"});
  CHECK(path("target(X,'c') :- sky1(X).\n", {"sky1"}, {0}).empty());
  CHECK_THROWS(decision_path(parse_ruleset("target(X,'c') :- sky1(X).\n"), 3));
}

TEST_CASE("size statistics") {
  auto stats = ruleset_size_stats(parse_ruleset("target(X,'c') :- f1(X), not f2(X).\n"));
  CHECK(stats.predicates == 2);
  CHECK(stats.size == 2);
  stats = ruleset_size_stats(parse_ruleset("target(X,'c') :- f1(X).\ntarget(X,'d') :- not f1(X).\n"));
  CHECK(stats.predicates == 1);
  CHECK(stats.size == 2);
  stats = ruleset_size_stats(parse_ruleset(
      "target(X,'a') :- f1(X).\ntarget(X,'b') :- f2(X).\ntarget(X,'a') :- f3(X).\ntarget(X,'b') :- f4(X).\n"));
  CHECK(stats.predicates == 4);
  CHECK(stats.size == 4);
  // abnormality literals count towards size only
  stats = ruleset_size_stats(parse_ruleset("target(X,'a') :- f1(X), not ab1(X).\nab1(X) :- f2(X).\n"));
  CHECK(stats.predicates == 2);
  CHECK(stats.size == 3);
  CHECK(ruleset_size_stats(parse_ruleset("target(X,'a').\n")).size == 0);
}

TEST_CASE("path share fixtures") {
  const auto r = checks::metric_fixtures();
  CHECK_MESSAGE(r.pass, r.detail);
}

TEST_CASE("path shares are invariant under renaming") {
  ConstraintSet cs;
  cs.classes["a"] = {{"sky"}, {"sand"}};
  const auto t = checks::bit_table(4, 3, {1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0}, {0, 0, 0, 1}, {"a", "b"});
  const RuleSet raw = parse_ruleset("target(X,'a') :- f0(X).\ntarget(X,'a') :- f1(X).\ntarget(X,'b') :- not f2(X).\n");
  const auto labels = checks::label_map({{"f0", "sky1"}, {"f1", "sand1"}, {"f2", "road1"}});
  const auto a = percent_undesired_desired(raw, t, cs, labels);
  const auto b = percent_undesired_desired(rename_predicates(raw, labels.names()), t, cs, labels);
  CHECK(a.pct_undesired == b.pct_undesired);
  CHECK(a.pct_desired == b.pct_desired);
  CHECK(a.coverage == b.coverage);
  CHECK(a.pct_undesired == 0.25);

  ConstraintSet renamed;
  renamed.classes["a"] = {{"cloud"}, {"dune"}};
  const auto relabels = checks::label_map({{"f0", "cloud1"}, {"f1", "dune1"}, {"f2", "road1"}});
  const auto c = percent_undesired_desired(raw, t, renamed, relabels);
  CHECK(c.pct_undesired == a.pct_undesired);
  CHECK(c.pct_desired == a.pct_desired);
}

TEST_CASE("fidelity and accuracy") {
  const auto r = checks::fidelity_identity();
  CHECK_MESSAGE(r.pass, r.detail);

  const CnnModel m = checks::mirror_model();
  const Dataset data = checks::mirror_data(6, 2);
  const Thresholds th{0.1, 0.1};
  // never fires: every prediction falls back to class 0, which the network predicts for half the images
  const auto never = parse_ruleset("target(X,'neg') :- f0(X), f1(X).\n");
  CHECK(fidelity(never, m, data, th, 0) == 0.5);
  CHECK(rule_accuracy(never, m, data, th, 1) == 0.5);

  const auto exact = parse_ruleset("target(X,'pos') :- f0(X).\ntarget(X,'neg') :- f1(X).\n");
  CHECK(fidelity(exact, m, data, th, 0) == 1.0);
  CHECK(fidelity(exact, m, data, th, 0) == fidelity(exact, m, data, th, 0));

  Dataset empty = data;
  empty.samples.clear();
  CHECK_THROWS(fidelity(exact, m, empty, th, 0));
  CHECK_THROWS(rule_accuracy(parse_ruleset("target(X,'other') :- f0(X).\n"), m, data, th, 0));
}

TEST_CASE("metrics csv") {
  std::ostringstream out;
  write_metrics_csv_header(out);
  MetricsRecord m;
  m.fidelity = 1;
  m.predicates = 4;
  m.size = 4;
  write_metrics_csv_row(m, out);
  CHECK(out.str() == "fidelity,accuracy,predicates,size,pct_undesired,pct_desired,coverage\n1,0,4,4,0,0,0\n");
}

TEST_CASE("constraints") {
  const auto cs = parse_constraints(R"({"desert_road": {"undesired": ["sky"], "desired": ["sand"]}})");
  CHECK(cs.is_undesired("desert_road", "sky"));
  CHECK(cs.is_desired("desert_road", "sand"));
  CHECK_FALSE(cs.is_undesired("street", "sky"));
  CHECK(parse_constraints(constraints_to_json(cs)).classes.at("desert_road").desired == cs.classes.at("desert_road").desired);
  CHECK_THROWS(parse_constraints(R"({"a": {"undesired": ["x"], "desired": ["x"]}})"));
  CHECK_THROWS(parse_constraints(R"({"a": {"wanted": ["x"]}})"));
  CHECK_THROWS(parse_constraints("[1,2]"));
  CHECK_THROWS(parse_constraints("{"));
}

}  // TEST_SUITE
