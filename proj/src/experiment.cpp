#include "nesybicor/experiment.hpp"

#include <chrono>

namespace nesybicor {

ExperimentSettings default_experiment_settings(std::uint64_t seed) {
  ExperimentSettings s;
  s.cnn.seed = seed;
  s.cnn.classes = 2;
  s.train.seed = seed;
  // short initial training leaves the network leaning on the spurious sky
  s.train.epochs = 8;
  s.train.learning_rate = 2e-3;
  s.correction.epochs = 30;
  s.correction.recalibrate_every = 3;
  s.correction.loss.lambda_b = 1.0;
  s.correction.loss.lambda_g = 0.2;
  return s;
}

namespace {

RuleSetReport report(const Extraction& ex, const CnnModel& model, const BenchmarkSuite& suite,
                     std::size_t fallback) {
  RuleSetReport r;
  const auto names = ex.labels.names();
  r.ruleset = print_ruleset(ex.rules, &names);
  r.train = evaluate_ruleset(ex.rules, ex.labels, suite.constraints, model, ex.thresholds, ex.table, suite.train,
                             fallback);
  r.matched_accuracy = rule_accuracy(ex.rules, model, suite.matched_test, ex.thresholds, fallback);
  r.shifted_accuracy = rule_accuracy(ex.rules, model, suite.test, ex.thresholds, fallback);
  r.cnn_matched_accuracy = evaluate(model, suite.matched_test).accuracy;
  r.cnn_shifted_accuracy = evaluate(model, suite.test).accuracy;
  return r;
}

}  // namespace

ExperimentResult run_bias_experiment(std::uint64_t seed, const ExperimentSettings& settings,
                                     const ProgressFn& progress) {
  const auto start = std::chrono::steady_clock::now();
  auto note = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  ExperimentResult out;
  out.seed = seed;
  const auto suite = benchmark_bias_suite(seed);
  const std::size_t fallback = suite.train.majority_class();

  note("training");
  CnnModel model = build_model(settings.cnn);
  train(model, suite.train, settings.train, {}, &suite.validation);

  note("correcting");
  TrainConfig correction_train = settings.train;
  correction_train.learning_rate = settings.correction_learning_rate;
  const auto corr = correct_bias(model, suite.train, suite.constraints, settings.correction, settings.extraction,
                                 correction_train, &suite.validation);
  out.initial = report(corr.initial, model, suite, fallback);
  out.corrected = report(corr.final, corr.model, suite, fallback);
  out.snapshots = corr.snapshots;
  out.epochs = corr.epochs;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace nesybicor
