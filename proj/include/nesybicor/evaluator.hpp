#pragma once

#include <cstddef>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "nesybicor/binarizer.hpp"
#include "nesybicor/cnn.hpp"
#include "nesybicor/constraints.hpp"
#include "nesybicor/rules.hpp"
#include "nesybicor/semlabel.hpp"

namespace nesybicor {

struct MetricsRecord {
  double fidelity = 0;
  double accuracy = 0;
  std::size_t predicates = 0;
  std::size_t size = 0;
  double pct_undesired = 0;
  double pct_desired = 0;
  double coverage = 0;
};

/// Column names for evaluating a rule-set over K filter bits: the label of a
/// labelled filter when `labels` is given, f<k> otherwise.
std::vector<std::string> evaluation_columns(std::size_t filters, const LabelMap* labels = nullptr);

/// Non-negated filter predicates in the direct body of rule `rule_index`.
std::set<std::string> decision_path(const RuleSet& rs, std::size_t rule_index);
/// Path of whichever rule classifies `bits`; empty on abstention.
std::set<std::string> decision_path(const RuleSet& rs, std::span<const std::string> columns,
                                    std::span<const std::uint8_t> bits);

struct PathShares {
  double pct_undesired = 0;
  double pct_desired = 0;
  double coverage = 0;
  std::size_t covered = 0;
};

/// Over covered rows: share whose path holds a predicate with a token the
/// fired class marks undesired; of the rest, share whose path holds a desired one.
PathShares percent_undesired_desired(const RuleSet& rs, const BinarizationTable& table,
                                     const ConstraintSet& constraints, const LabelMap& labels);

/// Predicted class index for each binary vector; abstentions become `fallback`.
std::vector<std::size_t> rule_predictions(const RuleSet& rs, std::span<const std::string> columns,
                                          const std::vector<std::vector<std::uint8_t>>& bits,
                                          const std::vector<std::string>& class_names, std::size_t fallback);

double fidelity(const RuleSet& rs, const CnnModel& model, const Dataset& data, const Thresholds& thresholds,
                std::size_t fallback, const LabelMap* labels = nullptr);
double rule_accuracy(const RuleSet& rs, const CnnModel& model, const Dataset& data, const Thresholds& thresholds,
                     std::size_t fallback, const LabelMap* labels = nullptr);

struct SizeStats {
  std::size_t predicates = 0;  // distinct filter predicates
  std::size_t size = 0;        // body literals over all rules
};
SizeStats ruleset_size_stats(const RuleSet& rs);

/// Full record: fidelity/accuracy on `eval`, path shares on the `train_table`.
MetricsRecord evaluate_ruleset(const RuleSet& rs, const LabelMap& labels, const ConstraintSet& constraints,
                               const CnnModel& model, const Thresholds& thresholds,
                               const BinarizationTable& train_table, const Dataset& eval, std::size_t fallback);

void write_metrics_csv_header(std::ostream& out);
void write_metrics_csv_row(const MetricsRecord& m, std::ostream& out);

}  // namespace nesybicor
