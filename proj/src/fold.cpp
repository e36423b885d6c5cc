#include "nesybicor/fold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace nesybicor {

std::size_t FoldParams::effective_tail(std::size_t rows) const {
  if (tail > 0) return tail;
  return std::max<std::size_t>(2, rows / 50);
}

namespace {

double entropy_term(double a, double b) { return a == 0 ? 0.0 : a * std::log2(a / (a + b)); }

}  // namespace

double information_gain(std::size_t tp, std::size_t fn, std::size_t tn, std::size_t fp) {
  const double n = static_cast<double>(tp + fn + tn + fp);
  if (n == 0) return -std::numeric_limits<double>::infinity();
  const double a = static_cast<double>(tp), b = static_cast<double>(fp);
  const double c = static_cast<double>(tn), d = static_cast<double>(fn);
  return (entropy_term(a, b) + entropy_term(b, a) + entropy_term(c, d) + entropy_term(d, c)) / n;
}

namespace {

using Rows = std::vector<std::size_t>;

struct Candidate {
  std::size_t column = 0;
  bool negated = false;
};

class Learner {
 public:
  Learner(const BinarizationTable& table, const FoldParams& params)
      : table_(table), params_(params), tail_(params.effective_tail(table.rows)) {}

  FoldResult run() {
    std::vector<std::size_t> counts(class_count(), 0);
    for (auto l : table_.labels) ++counts[l];
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < counts.size(); ++c) order.push_back(c);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return counts[a] > counts[b]; });

    Rows remaining(table_.rows);
    for (std::size_t i = 0; i < table_.rows; ++i) remaining[i] = i;

    std::vector<Draft> class_rules;
    for (std::size_t c : order) {
      Rows pos, neg;
      for (auto r : remaining) (table_.labels[r] == c ? pos : neg).push_back(r);
      if (pos.empty()) continue;
      auto drafts = learn_rules(pos, neg, 0);
      for (auto& d : drafts) {
        d.label = c;
        class_rules.push_back(std::move(d));
      }
      Rows next;
      for (auto r : remaining) {
        bool covered = false;
        for (const auto& d : class_rules)
          if (d.label == c && satisfies(d.body, r)) {
            covered = true;
            break;
          }
        if (!covered) next.push_back(r);
      }
      remaining = std::move(next);
    }

    FoldResult result;
    for (auto& d : class_rules) {
      Rule r;
      r.kind = Rule::Head::Target;
      r.head = class_name(d.label);
      r.body = to_literals(d.body);
      d.trace.rule_index = result.rules.rules.size();
      result.trace.push_back(d.trace);
      result.rules.rules.push_back(std::move(r));
    }
    for (auto& ab : abnormal_) {
      Rule r;
      r.kind = Rule::Head::Abnormality;
      r.head = "ab" + std::to_string(ab.id);
      r.body = to_literals(ab.draft.body);
      ab.draft.trace.rule_index = result.rules.rules.size();
      result.trace.push_back(ab.draft.trace);
      result.rules.rules.push_back(std::move(r));
    }
    return result;
  }

 private:
  // Body element: a column literal or a negated reference to abnormality slot `ab`.
  struct Element {
    bool abnormality = false;
    std::size_t index = 0;  // column, or position in abnormal_
    bool negated = false;
  };
  struct Draft {
    std::vector<Element> body;
    std::size_t label = 0;
    RuleTrace trace;
  };
  struct Abnormal {
    std::size_t id;
    Draft draft;
  };

  std::size_t class_count() const {
    std::size_t n = table_.class_names.size();
    for (auto l : table_.labels) n = std::max(n, l + 1);
    return n;
  }

  std::string class_name(std::size_t label) const {
    return label < table_.class_names.size() ? table_.class_names[label] : std::to_string(label);
  }

  std::vector<Literal> to_literals(const std::vector<Element>& body) const {
    std::vector<Literal> out;
    for (const auto& e : body) {
      if (e.abnormality)
        out.push_back({"ab" + std::to_string(abnormal_[e.index].id), e.negated});
      else
        out.push_back({table_.columns[e.index], e.negated});
    }
    return out;
  }

  bool holds(const Element& e, std::size_t row) const {
    const bool v = e.abnormality ? satisfies(abnormal_[e.index].draft.body, row) : table_.at(row, e.index);
    return e.negated ? !v : v;
  }

  bool satisfies(const std::vector<Element>& body, std::size_t row) const {
    for (const auto& e : body)
      if (!holds(e, row)) return false;
    return true;
  }

  std::vector<Draft> learn_rules(Rows pos, const Rows& neg, std::size_t depth) {
    std::vector<Draft> out;
    while (!pos.empty()) {
      const std::size_t saved = abnormal_.size();
      const std::size_t saved_id = next_id_;
      auto draft = learn_rule(pos, neg, depth);
      if (!draft) break;
      Rows rest;
      std::size_t covered = 0;
      for (auto r : pos) {
        if (satisfies(draft->body, r))
          ++covered;
        else
          rest.push_back(r);
      }
      if (covered < tail_ || covered == 0) {
        abnormal_.erase(abnormal_.begin() + static_cast<std::ptrdiff_t>(saved), abnormal_.end());
        next_id_ = saved_id;
        break;
      }
      draft->trace.covered_positives = covered;
      draft->trace.depth = depth;
      pos = std::move(rest);
      out.push_back(std::move(*draft));
    }
    return out;
  }

  std::optional<Draft> learn_rule(const Rows& pos, const Rows& neg, std::size_t depth) {
    Draft d;
    Rows p = pos, n = neg;
    std::vector<bool> used(table_.cols() * 2, false);
    while (static_cast<double>(n.size()) > params_.ratio * static_cast<double>(p.size())) {
      auto best = best_literal(p, n, used);
      if (!best) break;
      used[best->column * 2 + (best->negated ? 1 : 0)] = true;
      Element e{false, best->column, best->negated};
      d.body.push_back(e);
      std::erase_if(p, [&](auto r) { return !holds(e, r); });
      std::erase_if(n, [&](auto r) { return !holds(e, r); });
    }
    if (static_cast<double>(n.size()) > params_.ratio * static_cast<double>(p.size())) return std::nullopt;
    if (p.size() < tail_ || p.empty()) return std::nullopt;
    d.trace.default_true_positives = p.size();
    d.trace.default_false_positives = n.size();

    if (!n.empty() && depth < params_.max_exception_depth && n.size() >= tail_) {
      auto exceptions = learn_rules(n, p, depth + 1);
      for (auto& ex : exceptions) {
        abnormal_.push_back({next_id_++, std::move(ex)});
        d.body.push_back({true, abnormal_.size() - 1, true});
      }
    }
    return d;
  }

  // Highest information gain among literals that keep some positives and drop
  // some negatives, in tiers: precision raised and the FOLD-R++ gate
  // (fp + fn <= tp + tn) passed, precision raised only, then gate only, then
  // anything left. Ties go to the lowest column, positive before negated.
  std::optional<Candidate> best_literal(const Rows& p, const Rows& n, const std::vector<bool>& used) const {
    std::optional<Candidate> best[4];
    double score[4];
    std::fill(std::begin(score), std::end(score), -std::numeric_limits<double>::infinity());
    const double base_precision = static_cast<double>(p.size()) / static_cast<double>(p.size() + n.size());
    for (std::size_t col = 0; col < table_.cols(); ++col) {
      std::size_t p1 = 0, n1 = 0;
      for (auto r : p) p1 += table_.at(r, col);
      for (auto r : n) n1 += table_.at(r, col);
      for (int negated = 0; negated < 2; ++negated) {
        if (used[col * 2 + negated]) continue;
        const std::size_t tp = negated ? p.size() - p1 : p1;
        const std::size_t fp = negated ? n.size() - n1 : n1;
        if (tp == 0 || fp >= n.size()) continue;
        const std::size_t fn = p.size() - tp, tn = n.size() - fp;
        const bool raises = static_cast<double>(tp) / static_cast<double>(tp + fp) > base_precision;
        const bool gate = fp + fn <= tp + tn;
        const int tier = raises ? (gate ? 0 : 1) : (gate ? 2 : 3);
        const double ig = information_gain(tp, fn, tn, fp);
        if (ig > score[tier]) {
          score[tier] = ig;
          best[tier] = Candidate{col, negated == 1};
        }
      }
    }
    for (const auto& b : best)
      if (b) return b;
    return std::nullopt;
  }

  const BinarizationTable& table_;
  FoldParams params_;
  std::size_t tail_;
  std::vector<Abnormal> abnormal_;
  std::size_t next_id_ = 1;
};

}  // namespace

FoldResult learn_ruleset_traced(const BinarizationTable& table, const FoldParams& params) {
  if (table.rows == 0) throw std::invalid_argument("learn_ruleset: binarization table is empty");
  if (table.labels.size() != table.rows || table.bits.size() != table.rows * table.cols())
    throw std::invalid_argument("learn_ruleset: binarization table is inconsistent");
  if (params.ratio < 0) throw std::invalid_argument("learn_ruleset: ratio must be >= 0");
  std::size_t classes = table.class_names.size();
  for (auto l : table.labels) classes = std::max(classes, l + 1);
  if (classes < 2) throw std::invalid_argument("learn_ruleset: table has a single class");
  return Learner(table, params).run();
}

RuleSet learn_ruleset(const BinarizationTable& table, const FoldParams& params) {
  return learn_ruleset_traced(table, params).rules;
}

}  // namespace nesybicor
