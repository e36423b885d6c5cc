#pragma once

// Run configuration for the command-line pipeline, stored as INI text:
//
//   seed = 7
//   [data]        root, train_split, validation_split
//   [gen]         train, validation, test, test_matched   (images per class)
//   [cnn]         input_size, channels, blocks (comma list), filters, head (gap|flatten)
//   [train]       epochs, batch_size, learning_rate, l2, decay_factor, patience, threads, class_weights
//   [binarizer]   alpha, gamma
//   [fold]        ratio, tail, max_exception_depth
//   [labels]      top_m, percentile, beta, ignore_background
//   [correction]  epochs, recalibrate_every, lambda_b, lambda_g, top_images, learning_rate
//
// Every key is optional; unknown sections or keys are rejected.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "nesybicor/bias.hpp"
#include "nesybicor/cnn.hpp"

namespace nesybicor {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GenCounts {
  std::size_t train = 400;
  std::size_t validation = 100;
  std::size_t test = 200;
  std::size_t matched_test = 200;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path data_root;
  std::string train_split = "train";
  std::string validation_split = "validation";  // empty = none
  GenCounts gen;
  CnnConfig cnn;
  TrainConfig train;
  ExtractionParams extraction;
  CorrectionConfig correction;
  double correction_learning_rate = 1e-3;

  /// Pushes the seed into the CNN and optimiser settings.
  void apply_seed(std::uint64_t value);
  void validate() const;
};

/// Defaults matching the benchmark experiment.
RunConfig default_run_config();

/// Relative data_root is resolved against `base_dir`.
RunConfig parse_run_config(const std::string& ini_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Complete INI echo; parsing it back gives the same configuration.
std::string run_config_to_ini(const RunConfig& config);

}  // namespace nesybicor
