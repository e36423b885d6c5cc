#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nesybicor/cnn.hpp"
#include "nesybicor/dataset.hpp"
#include "nesybicor/tensor.hpp"

namespace nesybicor {

/// n images x K filters of feature-map L2 norms.
struct NormTable {
  std::size_t rows = 0;
  std::size_t filters = 0;
  std::vector<Real> values;  // row-major
  std::vector<std::size_t> labels;
  std::vector<std::string> image_ids;

  Real at(std::size_t i, std::size_t k) const { return values[i * filters + k]; }
  std::vector<Real> row(std::size_t i) const;
  std::vector<Real> column(std::size_t k) const;
};

struct BinarizerParams {
  Real alpha = 0.6;  // weight on the column mean
  Real gamma = 0.7;  // weight on the column standard deviation
};

using Thresholds = std::vector<Real>;

/// Filter identifiers used as predicate names in raw rule-sets.
std::string filter_predicate(std::size_t k);
/// Inverse of filter_predicate; nullopt for other names.
std::optional<std::size_t> parse_filter_predicate(const std::string& name);

struct BinarizationTable {
  std::size_t rows = 0;
  std::vector<std::string> columns;  // filter identifiers
  std::vector<std::uint8_t> bits;    // row-major, 0/1
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;

  std::size_t cols() const { return columns.size(); }
  bool at(std::size_t i, std::size_t k) const { return bits[i * columns.size() + k] != 0; }
  std::vector<std::uint8_t> row(std::size_t i) const;
};

/// Frobenius norm of one feature map.
Real feature_norm(const Tensor& feature_map);

/// Norms of each filter's map for every image, in dataset order.
NormTable build_norm_table(const CnnModel& model, const Dataset& data);

/// theta_k = alpha * mean_k + gamma * population standard deviation_k.
Thresholds compute_thresholds(const NormTable& table, const BinarizerParams& params);

/// Bit is 1 iff the norm is strictly above the filter's threshold.
BinarizationTable binarize(const NormTable& table, const Thresholds& thresholds,
                           std::vector<std::string> class_names = {});
std::vector<std::uint8_t> binarize_norms(std::span<const Real> norms, const Thresholds& thresholds);
std::vector<std::uint8_t> binarize_image(const CnnModel& model, const Tensor& image, const Thresholds& thresholds);

/// Header of filter identifiers plus "label"; one row per image.
void write_binarization_csv(const BinarizationTable& table, std::ostream& out);
BinarizationTable read_binarization_csv(std::istream& in);

}  // namespace nesybicor
