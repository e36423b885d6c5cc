#pragma once

// End-to-end bias-correction run on the synthetic benchmark: train a CNN,
// extract and label a rule-set, retrain with the semantic similarity loss,
// and measure both rule-sets.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nesybicor/bias.hpp"
#include "nesybicor/cnn.hpp"
#include "nesybicor/evaluator.hpp"
#include "nesybicor/scenegen.hpp"

namespace nesybicor {

struct ExperimentSettings {
  CnnConfig cnn;
  TrainConfig train;
  double correction_learning_rate = 1e-3;  // replaces train.learning_rate while correcting
  CorrectionConfig correction;
  ExtractionParams extraction;
};

/// Settings used by the benchmark experiment; `seed` feeds the CNN and the optimiser.
ExperimentSettings default_experiment_settings(std::uint64_t seed);

struct RuleSetReport {
  std::string ruleset;           // labelled text
  MetricsRecord train;           // path shares on the training table, fidelity/accuracy on training images
  double matched_accuracy = 0;   // rule-set accuracy on the rho_train test split
  double shifted_accuracy = 0;   // rule-set accuracy on the rho_test split
  double cnn_matched_accuracy = 0;
  double cnn_shifted_accuracy = 0;
};

struct ExperimentResult {
  std::uint64_t seed = 0;
  RuleSetReport initial;
  RuleSetReport corrected;
  std::vector<RecalibrationRecord> snapshots;
  std::vector<EpochRecord> epochs;
  double seconds = 0;
};

using ProgressFn = std::function<void(const std::string&)>;

ExperimentResult run_bias_experiment(std::uint64_t seed, const ExperimentSettings& settings,
                                     const ProgressFn& progress = {});

}  // namespace nesybicor
