#pragma once

// Induction of stratified default rules from a binarization table.
//
// Classes are learned one-vs-rest, most frequent first. For each class the
// learner repeatedly grows a default part literal by literal (information gain
// over the covered positives/negatives) until false positives drop to at most
// ratio * true positives. Remaining false positives are handed to a recursive
// call with the roles of positives and negatives swapped; each rule it learns
// becomes an abnormality rule ab<j> and the parent gains `not ab<j>`.
// Rows covered by a class's rules are removed before the next class.

#include <cstddef>
#include <vector>

#include "nesybicor/binarizer.hpp"
#include "nesybicor/rules.hpp"

namespace nesybicor {

struct FoldParams {
  double ratio = 0.5;
  /// Minimum number of positives a rule must cover; 0 selects max(2, n/50).
  std::size_t tail = 0;
  std::size_t max_exception_depth = 3;

  std::size_t effective_tail(std::size_t rows) const;
};

/// Bookkeeping for one learned rule, captured when it was accepted.
struct RuleTrace {
  std::size_t rule_index = 0;
  std::size_t depth = 0;  // 0 for class rules
  std::size_t default_true_positives = 0;
  std::size_t default_false_positives = 0;
  std::size_t covered_positives = 0;  // by the full rule, exceptions included
};

struct FoldResult {
  RuleSet rules;
  std::vector<RuleTrace> trace;
};

FoldResult learn_ruleset_traced(const BinarizationTable& table, const FoldParams& params);
RuleSet learn_ruleset(const BinarizationTable& table, const FoldParams& params);

/// Information gain of a literal splitting (tp, fn) positives and (fp, tn) negatives.
double information_gain(std::size_t tp, std::size_t fn, std::size_t tn, std::size_t fp);

}  // namespace nesybicor
