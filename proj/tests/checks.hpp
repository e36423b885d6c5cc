#pragma once

// Property checks behind acceptance criteria 2, 3, 4 and 6. The unit tests
// run them at reduced sizes; the acceptance runner at full size.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nesybicor/bias.hpp"
#include "nesybicor/binarizer.hpp"
#include "nesybicor/evaluator.hpp"
#include "nesybicor/fold.hpp"
#include "nesybicor/rng.hpp"
#include "nesybicor/rules.hpp"

namespace checks {

using namespace nesybicor;

struct Result {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

inline NormTable norm_table(std::size_t rows, std::size_t filters, std::vector<Real> values) {
  NormTable t;
  t.rows = rows;
  t.filters = filters;
  t.values = std::move(values);
  t.labels.assign(rows, 0);
  for (std::size_t i = 0; i < rows; ++i) t.image_ids.push_back("img" + std::to_string(i));
  return t;
}

// ---- criterion 2: binarizer oracle and strict-threshold monotonicity

inline Result binarizer(std::size_t random_tables, std::uint64_t seed) {
  Result r;
  if (feature_norm(Tensor({2, 2}, {3, 4, 0, 0})) != 5) r.fail("feature_norm([[3,4],[0,0]]) != 5");
  const auto col = norm_table(3, 1, {1, 2, 3});
  const Real theta = compute_thresholds(col, {0, 1})[0];
  if (std::abs(theta - std::sqrt(2.0 / 3.0)) > 1e-12) r.fail("theta([1,2,3], 0, 1) != sqrt(2/3)");
  if (compute_thresholds(col, {1, 0})[0] != 2) r.fail("theta([1,2,3], 1, 0) != 2");
  const auto exact = binarize(norm_table(2, 1, {2.1, 2.0}), Thresholds{2.0});
  if (!exact.at(0, 0) || exact.at(1, 0)) r.fail("strict threshold: 2.1 -> 1 and 2.0 -> 0 expected");

  Rng rng(seed);
  for (std::size_t t = 0; t < random_tables && r.pass; ++t) {
    const std::size_t rows = 1 + rng.uniform_int(0, 30), cols = 1 + rng.uniform_int(0, 8);
    std::vector<Real> v(rows * cols);
    for (auto& x : v) x = rng.bernoulli(0.2) ? 0.0 : std::round(rng.uniform(0, 10) * 4) / 4;  // ties on purpose
    const auto nt = norm_table(rows, cols, v);
    const BinarizerParams p{rng.uniform(0, 1.5), rng.uniform(0, 1.5)};
    const auto th = compute_thresholds(nt, p);
    const auto bt = binarize(nt, th);
    Thresholds higher = th;
    for (auto& h : higher) h += rng.uniform(0, 2);
    const auto bh = binarize(nt, higher);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = 0; k < cols; ++k) {
        if (bt.at(i, k) != (nt.at(i, k) > th[k])) r.fail("bit differs from norm > theta");
        if (bh.at(i, k) && !bt.at(i, k)) r.fail("raising theta turned a 0 into a 1");
        for (std::size_t j = 0; j < rows; ++j)
          if (nt.at(j, k) >= nt.at(i, k) && bt.at(i, k) && !bt.at(j, k)) r.fail("larger norm got a smaller bit");
      }
  }
  return r;
}

// ---- criterion 3: rule induction against a decision-list oracle

inline BinarizationTable bit_table(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> bits,
                                   std::vector<std::size_t> labels, std::vector<std::string> classes) {
  BinarizationTable t;
  t.rows = rows;
  t.columns = filter_columns(cols);
  t.bits = std::move(bits);
  t.labels = std::move(labels);
  t.class_names = std::move(classes);
  return t;
}

/// Rivest's consistency test for decision lists whose terms have at most two
/// literals: keep removing rows matched by a term that is pure on the rest.
inline bool decision_list_exists(const BinarizationTable& t) {
  std::vector<bool> alive(t.rows, true);
  std::size_t left = t.rows;
  const std::size_t n = t.cols();
  // literal l in [0, 2n): column l/2, negated when odd; l == 2n is "true"
  auto lit = [&](std::size_t i, std::size_t l) { return l == 2 * n || t.at(i, l / 2) != (l % 2 == 1); };
  while (left > 0) {
    bool progress = false;
    for (std::size_t a = 0; a <= 2 * n && !progress; ++a)
      for (std::size_t b = a; b <= 2 * n && !progress; ++b) {
        std::size_t label = 0, hit = 0;
        bool pure = true;
        for (std::size_t i = 0; i < t.rows && pure; ++i) {
          if (!alive[i] || !lit(i, a) || !lit(i, b)) continue;
          if (hit++ == 0) label = t.labels[i];
          else if (t.labels[i] != label) pure = false;
        }
        if (!pure || hit == 0) continue;
        for (std::size_t i = 0; i < t.rows; ++i)
          if (alive[i] && lit(i, a) && lit(i, b)) alive[i] = false, --left;
        progress = true;
      }
    if (!progress) return false;
  }
  return true;
}

inline double train_accuracy(const RuleSet& rs, const BinarizationTable& t) {
  RuleEvaluator ev(rs, t.columns);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < t.rows; ++i) {
    const auto row = t.row(i);
    const auto c = ev.classify(row);
    hits += c.label && *c.label == t.class_names[t.labels[i]];
  }
  return t.rows ? static_cast<double>(hits) / static_cast<double>(t.rows) : 1.0;
}

/// A table drawn either from a random two-literal decision list or with free labels.
inline BinarizationTable random_table(Rng& rng, std::size_t max_cols, std::size_t max_rows) {
  const std::size_t cols = 1 + rng.uniform_int(0, static_cast<std::int64_t>(max_cols) - 1);
  const std::size_t rows = 1 + rng.uniform_int(0, static_cast<std::int64_t>(max_rows) - 1);
  const std::size_t classes = 2 + (rng.bernoulli(0.3) ? 1 : 0);
  std::vector<std::uint8_t> bits(rows * cols);
  for (auto& b : bits) b = rng.bernoulli(0.5);
  std::vector<std::size_t> labels(rows);
  if (rng.bernoulli(0.6)) {
    struct Term {
      std::size_t a, b;
      bool na, nb;
      std::size_t label;
    };
    std::vector<Term> dl(1 + rng.uniform_int(0, 3));
    for (auto& term : dl)
      term = {static_cast<std::size_t>(rng.uniform_int(0, cols - 1)), static_cast<std::size_t>(rng.uniform_int(0, cols - 1)),
              rng.bernoulli(0.5), rng.bernoulli(0.5), static_cast<std::size_t>(rng.uniform_int(0, classes - 1))};
    const std::size_t fallback = rng.uniform_int(0, classes - 1);
    for (std::size_t i = 0; i < rows; ++i) {
      labels[i] = fallback;
      for (const auto& term : dl)
        if ((bits[i * cols + term.a] != 0) != term.na && (bits[i * cols + term.b] != 0) != term.nb) {
          labels[i] = term.label;
          break;
        }
    }
  } else {
    for (auto& l : labels) l = rng.uniform_int(0, classes - 1);
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  return bit_table(rows, cols, std::move(bits), std::move(labels), std::move(names));
}

inline bool noiseless(const BinarizationTable& t) {
  for (std::size_t i = 0; i < t.rows; ++i)
    for (std::size_t j = i + 1; j < t.rows; ++j)
      if (t.labels[i] != t.labels[j] && t.row(i) == t.row(j)) return false;
  return true;
}

/// Settings under which induction is expected to be exact: every rule may be
/// as specific as a single row.
inline FoldParams exact_fold_params() {
  FoldParams p;
  p.tail = 1;
  p.max_exception_depth = 8;
  return p;
}

inline Result induction(std::size_t oracle_tables, std::size_t fuzz_runs, std::uint64_t seed,
                        std::size_t* oracle_count = nullptr) {
  Result r;
  Rng rng(seed);
  std::size_t checked = 0;
  for (std::size_t attempt = 0; checked < oracle_tables && attempt < 50 * oracle_tables; ++attempt) {
    const auto t = random_table(rng, 6, 24);
    if (!noiseless(t) || !decision_list_exists(t)) continue;
    ++checked;
    const auto rs = learn_ruleset(t, exact_fold_params());
    if (train_accuracy(rs, t) != 1.0) {
      std::ostringstream msg;
      msg << "table " << attempt << " (" << t.rows << "x" << t.cols() << "): accuracy " << train_accuracy(rs, t);
      r.fail(msg.str());
    }
  }
  if (checked < oracle_tables) r.fail("only " + std::to_string(checked) + " oracle tables generated");
  if (oracle_count) *oracle_count = checked;

  for (std::size_t run = 0; run < fuzz_runs; ++run) {
    auto t = random_table(rng, 8, 40);
    FoldParams p;
    p.ratio = rng.uniform(0, 1);
    p.tail = rng.uniform_int(0, 3);
    p.max_exception_depth = rng.uniform_int(0, 4);
    const auto res = learn_ruleset_traced(t, p);
    if (!stratification_check(res.rules)) r.fail("stratification failed in fuzz run " + std::to_string(run));
    if (!abx_uniqueness_check(res.rules)) r.fail("abx uniqueness failed in fuzz run " + std::to_string(run));
    const std::size_t tail = p.effective_tail(t.rows);
    for (const auto& tr : res.trace) {
      if (static_cast<double>(tr.default_false_positives) > p.ratio * static_cast<double>(tr.default_true_positives))
        r.fail("rule " + std::to_string(tr.rule_index) + " breaks the ratio in fuzz run " + std::to_string(run));
      if (tr.depth == 0 && tr.covered_positives < tail)
        r.fail("rule " + std::to_string(tr.rule_index) + " breaks the tail in fuzz run " + std::to_string(run));
    }
  }
  return r;
}

// ---- criterion 4: appendix rule-sets

inline const std::vector<std::string>& appendix_names() {
  static const std::vector<std::string> names{"babek_initial", "babek_corrected", "dedrh_initial", "dedrh_corrected",
                                              "babe_initial",  "babe_corrected",  "deh_initial",   "deh_corrected"};
  return names;
}

inline Result appendix(const std::filesystem::path& dir) {
  Result r;
  for (const auto& name : appendix_names()) {
    std::ifstream in(dir / (name + ".txt"));
    if (!in) {
      r.fail("missing fixture " + name);
      continue;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      const RuleSet rs = parse_ruleset(ss.str());
      if (!stratification_check(rs)) r.fail(name + ": not stratified");
      if (!abx_uniqueness_check(rs)) r.fail(name + ": abx uniqueness");
      const std::string printed = print_ruleset(rs);
      if (!(parse_ruleset(printed) == rs)) r.fail(name + ": parse(print(rs)) != rs");
      if (print_ruleset(parse_ruleset(printed)) != printed) r.fail(name + ": print is not a fixed point");
    } catch (const std::exception& e) {
      r.fail(name + ": " + e.what());
    }
  }
  return r;
}

// ---- criterion 6: metric identities

inline LabelMap label_map(const std::vector<std::pair<std::string, std::string>>& pairs) {
  LabelMap m;
  for (const auto& [pred, name] : pairs) {
    FilterLabel l;
    l.filter = *parse_filter_predicate(pred);
    l.name = name;
    l.concepts = label_tokens(name);
    m.filters[pred] = l;
  }
  return m;
}

inline Result metric_fixtures() {
  Result r;
  ConstraintSet cs;
  cs.classes["a"] = {{"sky"}, {"sand"}};
  cs.classes["b"] = {{"sky"}, {"road"}};
  const auto labels = label_map({{"f0", "sky1"}, {"f1", "sand1"}, {"f2", "road1"}});

  // rows: sky-path a, sand-path a, sand-path a, plain b
  const auto t = bit_table(4, 3, {1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0}, {0, 0, 0, 1}, {"a", "b"});
  const RuleSet rs = parse_ruleset(
      "target(X,'a') :- sky1(X).\n"
      "target(X,'a') :- sand1(X).\n"
      "target(X,'b') :- not road1(X).\n");
  auto shares = percent_undesired_desired(rs, t, cs, labels);
  if (shares.pct_undesired != 0.25 || shares.pct_desired != 0.5 || shares.coverage != 1.0)
    r.fail("4-image fixture: expected (0.25, 0.5, 1)");

  const auto all_sky = bit_table(4, 3, {1, 0, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1}, {0, 0, 0, 0}, {"a", "b"});
  shares = percent_undesired_desired(parse_ruleset("target(X,'a') :- sky1(X).\n"), all_sky, cs, labels);
  if (shares.pct_undesired != 1.0 || shares.pct_desired != 0.0 || shares.coverage != 1.0)
    r.fail("all-undesired fixture: expected (1, 0, 1)");

  ConstraintSet none;
  none.classes["a"] = {{"tree"}, {"house"}};
  shares = percent_undesired_desired(rs, t, none, labels);
  if (shares.pct_undesired != 0.0 || shares.pct_desired != 0.0 || shares.coverage != 1.0)
    r.fail("no-match fixture: expected (0, 0, 1)");

  // half the rows abstain: shares are over covered rows only
  shares = percent_undesired_desired(parse_ruleset("target(X,'a') :- sky1(X).\n"), t, cs, labels);
  if (shares.pct_undesired != 1.0 || shares.coverage != 0.25) r.fail("coverage fixture: expected (1, _, 0.25)");
  return r;
}

/// Two filters that copy x and -x, a head that compares their means: the
/// binarized table determines the prediction exactly.
inline CnnModel mirror_model() {
  CnnConfig c;
  c.input_size = 2;
  c.channels = 1;
  c.blocks = {};
  c.filters = 2;
  c.classes = 2;
  CnnModel m = build_model(c);
  Tensor& ker = m.last_kernels();
  for (auto& v : ker.values()) v = 0;
  ker[4] = 1;       // filter 0, centre tap
  ker[9 + 4] = -1;  // filter 1, centre tap
  for (auto& v : m.last_bias().values()) v = 0;
  m.params[2] = Tensor({2, 2}, {1, -1, -1, 1});
  m.params[3] = Tensor(Shape{2});
  return m;
}

inline Dataset mirror_data(std::size_t per_class, std::uint64_t seed) {
  Dataset d;
  d.class_names = {"pos", "neg"};
  d.vocabulary = {"background", "blob"};
  Rng rng(seed);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      Sample s;
      s.id = d.class_names[c] + std::to_string(i);
      s.label = c;
      const double v = rng.uniform(0.5, 1.0) * (c == 0 ? 1 : -1);
      s.image = Tensor({1, 2, 2}, {v, v, v, v});
      s.mask = SegMask{2, 2, {1, 1, 1, 1}};
      d.samples.push_back(std::move(s));
    }
  return d;
}

inline Result fidelity_identity() {
  Result r;
  const CnnModel m = mirror_model();
  const Dataset data = mirror_data(12, 5);
  const Extraction ex = extract_ruleset(m, data, ExtractionParams{});
  const std::size_t fb = data.majority_class();
  if (fidelity(ex.rules, m, data, ex.thresholds, fb) != 1.0) r.fail("raw rule-set fidelity != 1");
  if (fidelity(ex.labelled(), m, data, ex.thresholds, fb, &ex.labels) != 1.0) r.fail("labelled fidelity != 1");
  if (rule_accuracy(ex.rules, m, data, ex.thresholds, fb) != 1.0) r.fail("rule accuracy != 1");
  return r;
}

}  // namespace checks
