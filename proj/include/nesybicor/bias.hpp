#pragma once

// Bias correction: concept representation vectors built from a labelled
// rule-set, the semantic similarity loss that pushes filters away from
// undesired concepts and towards desired ones, and the retraining loop that
// periodically re-extracts the rule-set and recalibrates the vectors.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nesybicor/autodiff.hpp"
#include "nesybicor/binarizer.hpp"
#include "nesybicor/cnn.hpp"
#include "nesybicor/constraints.hpp"
#include "nesybicor/evaluator.hpp"
#include "nesybicor/fold.hpp"
#include "nesybicor/rules.hpp"
#include "nesybicor/semlabel.hpp"

namespace nesybicor {

struct ConceptVector {
  Tensor values;  // flattened feature-map size
  std::string concept_name;
  std::string class_name;
  std::vector<std::string> filters;  // contributing filter predicates
};

struct ClassBank {
  std::vector<ConceptVector> undesired;
  std::vector<ConceptVector> desired;
};

struct ConceptBank {
  std::map<std::string, ClassBank> classes;

  bool empty() const { return vector_count() == 0; }
  std::size_t vector_count() const;
  const ClassBank* find(const std::string& cls) const;
};

struct LossParams {
  Real lambda_b = 5e-2;
  Real lambda_g = 1e-3;

  void validate() const;
};

struct CorrectionConfig {
  std::size_t epochs = 50;
  std::size_t recalibrate_every = 5;
  LossParams loss;
  std::size_t top_images = 10;

  void validate() const;
};

struct ExtractionParams {
  BinarizerParams binarizer;
  FoldParams fold;
  LabelParams labels;
};

/// Everything produced by one rule-extraction pass over a dataset.
struct Extraction {
  NormTable norms;
  Thresholds thresholds;
  BinarizationTable table;
  RuleSet rules;  // raw filter predicates
  LabelMap labels;

  RuleSet labelled() const { return rename_predicates(rules, labels.names()); }
};

Extraction extract_ruleset(const CnnModel& model, const Dataset& data, const ExtractionParams& params);

/// Mean flattened map of `filter` over its top images (all images if fewer).
Tensor filter_repr_vector(const CnnModel& model, const Dataset& data, const NormTable& norms, std::size_t filter,
                          std::size_t top = 10);

/// Filter predicates occurring un-negated in the direct body of a rule for `cls`.
std::vector<std::string> positively_associated(const RuleSet& rs, const std::string& cls);

/// Mean representation vector of the filters positively associated with `cls`
/// whose label carries `concept_name`; nullopt when there are none.
std::optional<ConceptVector> concept_vector(const std::string& concept_name, const std::string& cls,
                                            const RuleSet& rs, const LabelMap& labels, const CnnModel& model,
                                            const Dataset& data, const NormTable& norms, std::size_t top = 10);

ConceptBank build_concept_bank(const ConstraintSet& constraints, const RuleSet& rs, const LabelMap& labels,
                               const CnnModel& model, const Dataset& data, const NormTable& norms,
                               std::size_t top = 10);

/// Sum over the K maps of lambda_b * sum_b cos(r_j, r_b) - lambda_g * sum_g cos(r_j, r_g);
/// bank vectors enter as constants.
Var semantic_similarity_loss(const Var& feature_maps, const ClassBank& bank, const LossParams& params);

/// Means concepts present in both banks, adopts new ones, keeps old ones.
ConceptBank recalibrate(const ConceptBank& old_bank, const ConceptBank& new_bank);

struct RecalibrationRecord {
  std::size_t epoch = 0;
  MetricsRecord metrics;
  std::size_t bank_vectors = 0;
  std::string ruleset;  // labelled rule-set text
};

struct CorrectionResult {
  CnnModel model;
  Extraction initial;
  Extraction final;
  ConceptBank bank;
  std::vector<EpochRecord> epochs;
  std::vector<RecalibrationRecord> snapshots;  // epoch 0, each recalibration, final epoch
};

/// Retrains `model` with cross-entropy plus the semantic similarity loss,
/// recalibrating the bank every `recalibrate_every` epochs. `train_config`
/// supplies optimiser settings; its epoch count is replaced by `config.epochs`.
CorrectionResult correct_bias(const CnnModel& model, const Dataset& train_data, const ConstraintSet& constraints,
                              const CorrectionConfig& config, const ExtractionParams& extraction,
                              const TrainConfig& train_config, const Dataset* validation = nullptr);

/// epoch,ce_loss,ss_loss,train_acc,validation_loss,learning_rate followed by the
/// metric columns, which are filled on snapshot epochs only.
void write_history_csv(const CorrectionResult& result, std::ostream& out);

}  // namespace nesybicor
