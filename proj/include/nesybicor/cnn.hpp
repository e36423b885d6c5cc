#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "nesybicor/autodiff.hpp"
#include "nesybicor/dataset.hpp"
#include "nesybicor/tensor.hpp"

namespace nesybicor {

/// How the dense head sees the last layer: every map position, or one mean per filter.
enum class HeadKind : std::uint8_t { Flatten = 0, GlobalAverage = 1 };

/// Each block is a 3x3 same-padding convolution, ReLU and 2x2 max pooling.
/// The last convolutional layer (`filters` kernels, ReLU, no pooling) feeds a
/// dense head.
struct CnnConfig {
  std::size_t input_size = 32;
  std::size_t channels = 3;
  std::vector<std::size_t> blocks{8, 16};
  std::size_t filters = 16;
  std::size_t classes = 2;
  HeadKind head = HeadKind::GlobalAverage;
  std::uint64_t seed = 0;

  void validate() const;
  /// Side length of the last layer's feature maps.
  std::size_t feature_map_extent() const;
  std::size_t feature_map_size() const { return feature_map_extent() * feature_map_extent(); }

  friend bool operator==(const CnnConfig&, const CnnConfig&) = default;
};

struct CnnModel {
  CnnConfig config;
  /// Declaration order: (kernel, bias) per block, last-layer (kernel, bias), head (weights, bias).
  std::vector<Tensor> params;

  /// Kernels and dense weights; biases are excluded from weight decay.
  static bool is_weight(std::size_t param_index) { return param_index % 2 == 0; }
  const Tensor& last_kernels() const { return params[2 * config.blocks.size()]; }
  Tensor& last_kernels() { return params[2 * config.blocks.size()]; }
  const Tensor& last_bias() const { return params[2 * config.blocks.size() + 1]; }
  Tensor& last_bias() { return params[2 * config.blocks.size() + 1]; }
};

/// He-normal kernels, zero biases; deterministic per config seed.
CnnModel build_model(const CnnConfig& config);

struct ForwardResult {
  Tensor feature_maps;  // [K,h,w], post-ReLU
  Tensor logits;        // [C]

  std::size_t filter_count() const { return feature_maps.dim(0); }
  /// Filter k's map as an [h,w] tensor.
  Tensor feature_map(std::size_t k) const;
  /// Filter k's map flattened to [h*w].
  Tensor flat_map(std::size_t k) const;
};

ForwardResult forward(const CnnModel& model, const Tensor& image);

struct GraphOutputs {
  Var feature_maps;
  Var logits;
};

/// Differentiable forward pass over caller-supplied parameter nodes.
GraphOutputs forward_graph(const CnnConfig& config, std::span<const Var> params, const Var& image);

/// Argmax of the logits; ties go to the lowest class index.
std::size_t argmax(const Tensor& logits);
std::size_t predict(const CnnModel& model, const Tensor& image);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  Real learning_rate = 1e-3;
  Real l2 = 5e-4;
  Real decay_factor = 0.5;
  std::size_t patience = 5;
  std::vector<Real> class_weights;  // empty = all ones
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate(std::size_t classes) const;
};

/// Per-image auxiliary loss over the last layer's feature maps ([K,h,w] node).
using AuxLoss = std::function<Var(const Var& feature_maps, const Sample& sample)>;

/// Called after every completed epoch (1-based) with the current model.
using EpochHook = std::function<void(std::size_t epoch, const CnnModel& model)>;

struct EpochRecord {
  std::size_t epoch = 0;
  Real ce_loss = 0;    // mean class-weighted cross-entropy over the epoch
  Real aux_loss = 0;   // mean auxiliary loss per image
  Real l2_loss = 0;    // penalty at the end of the epoch
  Real train_accuracy = 0;
  Real validation_loss = 0;
  Real learning_rate = 0;
};

struct BatchObjective {
  Real ce = 0;     // mean of class-weighted cross-entropy over the batch
  Real aux = 0;    // mean auxiliary loss over the batch
  Real l2 = 0;     // coefficient * sum of squared weights
  Real total = 0;  // ce + aux + l2
  std::size_t correct = 0;
  std::vector<Tensor> grads;
};

Real l2_penalty(const CnnModel& model, Real coefficient);

/// Objective value and parameter gradients on one batch. Per-example passes may
/// run on several threads; gradients are reduced in batch order.
BatchObjective batch_objective(const CnnModel& model, const Dataset& data, std::span<const std::size_t> batch,
                               const TrainConfig& config, const AuxLoss& aux = {});

std::vector<EpochRecord> train(CnnModel& model, const Dataset& data, const TrainConfig& config,
                               const AuxLoss& aux = {}, const Dataset* validation = nullptr,
                               const EpochHook& on_epoch = {});

/// Mean unweighted cross-entropy and accuracy of the model on a dataset.
struct Evaluation {
  Real loss = 0;
  Real accuracy = 0;
};
Evaluation evaluate(const CnnModel& model, const Dataset& data);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Magic "NSBC", version byte, config echo, then each parameter array as a
/// u64 element count followed by little-endian float32 values.
void save_checkpoint(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace nesybicor
