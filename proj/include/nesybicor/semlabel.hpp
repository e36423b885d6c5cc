#pragma once

// Semantic labelling of filters: the region a filter attends to on its
// top-activating images is compared against segmentation masks by IoU, and
// the aggregated scores name the filter's predicate (e.g. "sky1", "sky2_road1").

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "nesybicor/binarizer.hpp"
#include "nesybicor/cnn.hpp"
#include "nesybicor/dataset.hpp"
#include "nesybicor/rules.hpp"

namespace nesybicor {

struct LabelParams {
  std::size_t top_m = 10;
  double percentile = 95;  // activation percentile that delimits the attended region
  double beta = 0.8;       // secondary concepts need score >= beta * best score
  bool ignore_background = true;  // concept id 0 never names a filter

  void validate() const;
};

struct FilterLabel {
  std::size_t filter = 0;
  std::string name;
  std::vector<std::string> concepts;                     // tokens in the name, by score
  std::vector<std::pair<std::string, double>> scores;    // every scored concept, descending
};

/// Labels keyed by raw filter predicate (f<k>).
struct LabelMap {
  std::map<std::string, FilterLabel> filters;

  PredicateNames names() const;
  /// Concept tokens for a predicate: from the map when it is a raw filter
  /// predicate or a known label, otherwise parsed from the name itself.
  std::vector<std::string> tokens(const std::string& predicate) const;
  bool empty() const { return filters.empty(); }
};

/// "sky1_road2" -> {"sky", "road"}.
std::vector<std::string> label_tokens(const std::string& name);

/// Indices of the m largest norms of a filter, descending; ties to the lower index.
std::vector<std::size_t> top_m_images(const NormTable& table, std::size_t filter, std::size_t m);

/// Half-pixel-centred bilinear resize of an [h,w] map.
Tensor bilinear_resize(const Tensor& map, std::size_t height, std::size_t width);

/// Linear-interpolated percentile (q in [0,100]).
double percentile(std::vector<Real> values, double q);

/// Pixels of the upsampled map at or above its q-th percentile; empty for an all-zero map.
std::vector<std::uint8_t> filter_mask(const Tensor& feature_map, std::size_t height, std::size_t width, double q);

/// IoU of the mask with each concept region it overlaps.
std::map<std::string, double> iou_scores(const std::vector<std::uint8_t>& mask, const SegMask& seg,
                                         const std::vector<std::string>& vocabulary);

/// Mean IoU per concept over the filter's top-m images; the name uses fresh counters.
FilterLabel label_filter(const CnnModel& model, const Dataset& data, const NormTable& norms, std::size_t filter,
                         const LabelParams& params);

/// Labels every filter predicate occurring in `rs`, numbering names in filter order.
LabelMap label_all(const CnnModel& model, const Dataset& data, const NormTable& norms, const RuleSet& rs,
                   const LabelParams& params);

/// CSV: predicate,label,scores  (scores as concept:value pairs separated by ';').
void write_labels_csv(const LabelMap& labels, std::ostream& out);
LabelMap read_labels_csv(std::istream& in);

}  // namespace nesybicor
