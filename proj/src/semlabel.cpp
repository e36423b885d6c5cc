#include "nesybicor/semlabel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace nesybicor {

void LabelParams::validate() const {
  if (top_m < 1) throw std::invalid_argument("LabelParams.top_m must be >= 1");
  if (!(percentile > 0 && percentile < 100)) throw std::invalid_argument("LabelParams.percentile must be in (0,100)");
  if (!(beta > 0 && beta <= 1)) throw std::invalid_argument("LabelParams.beta must be in (0,1]");
}

PredicateNames LabelMap::names() const {
  PredicateNames out;
  for (const auto& [pred, label] : filters) out.emplace(pred, label.name);
  return out;
}

std::vector<std::string> LabelMap::tokens(const std::string& predicate) const {
  if (auto it = filters.find(predicate); it != filters.end()) return it->second.concepts;
  for (const auto& [pred, label] : filters)
    if (label.name == predicate) return label.concepts;
  return label_tokens(predicate);
}

std::vector<std::string> label_tokens(const std::string& name) {
  std::vector<std::string> out;
  std::stringstream in(name);
  std::string part;
  while (std::getline(in, part, '_')) {
    while (!part.empty() && std::isdigit(static_cast<unsigned char>(part.back()))) part.pop_back();
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::vector<std::size_t> top_m_images(const NormTable& table, std::size_t filter, std::size_t m) {
  if (filter >= table.filters) throw std::out_of_range("filter " + std::to_string(filter) + " out of range");
  if (m > table.rows)
    throw std::invalid_argument("top_m_images: m = " + std::to_string(m) + " exceeds " + std::to_string(table.rows) +
                                " images");
  std::vector<std::size_t> idx(table.rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return table.at(a, filter) > table.at(b, filter); });
  idx.resize(m);
  return idx;
}

Tensor bilinear_resize(const Tensor& map, std::size_t height, std::size_t width) {
  if (map.rank() != 2) throw ShapeError("bilinear_resize expects [h,w], got " + shape_string(map.shape()));
  const std::size_t h = map.dim(0), w = map.dim(1);
  Tensor out({height, width});
  auto source = [](std::size_t dst, std::size_t src_extent, std::size_t dst_extent, std::size_t& i0,
                   std::size_t& i1, double& frac) {
    double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(src_extent) / static_cast<double>(dst_extent) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_extent - 1));
    i0 = static_cast<std::size_t>(std::floor(s));
    i1 = std::min(i0 + 1, src_extent - 1);
    frac = s - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < height; ++y) {
    std::size_t y0, y1;
    double fy;
    source(y, h, height, y0, y1, fy);
    for (std::size_t x = 0; x < width; ++x) {
      std::size_t x0, x1;
      double fx;
      source(x, w, width, x0, x1, fx);
      const double top = map.at(y0, x0) * (1 - fx) + map.at(y0, x1) * fx;
      const double bottom = map.at(y1, x0) * (1 - fx) + map.at(y1, x1) * fx;
      out[y * width + x] = top * (1 - fy) + bottom * fy;
    }
  }
  return out;
}

double percentile(std::vector<Real> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

std::vector<std::uint8_t> filter_mask(const Tensor& feature_map, std::size_t height, std::size_t width, double q) {
  if (feature_map.empty()) throw std::invalid_argument("filter_mask: empty feature map");
  std::vector<std::uint8_t> mask(height * width, 0);
  const bool all_zero =
      std::all_of(feature_map.values().begin(), feature_map.values().end(), [](Real v) { return v == 0; });
  if (all_zero) return mask;
  const Tensor up = bilinear_resize(feature_map, height, width);
  const std::vector<Real> values(up.values().begin(), up.values().end());
  const double cut = percentile(values, q);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = up[i] >= cut;
  return mask;
}

std::map<std::string, double> iou_scores(const std::vector<std::uint8_t>& mask, const SegMask& seg,
                                         const std::vector<std::string>& vocabulary) {
  if (mask.size() != seg.ids.size())
    throw ShapeError("iou_scores: mask has " + std::to_string(mask.size()) + " pixels, segmentation has " +
                     std::to_string(seg.ids.size()));
  std::vector<std::size_t> inter(256, 0), region(256, 0);
  std::size_t mask_area = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto id = seg.ids[i];
    ++region[id];
    if (mask[i]) {
      ++mask_area;
      ++inter[id];
    }
  }
  std::map<std::string, double> out;
  for (std::size_t id = 0; id < 256; ++id) {
    if (inter[id] == 0) continue;
    const std::size_t uni = mask_area + region[id] - inter[id];
    const std::string name = id < vocabulary.size() ? vocabulary[id] : "concept" + std::to_string(id);
    out[name] = static_cast<double>(inter[id]) / static_cast<double>(uni);
  }
  return out;
}

namespace {

struct Scores {
  std::vector<std::pair<std::string, double>> ranked;
};

Scores aggregate(const CnnModel& model, const Dataset& data, const NormTable& norms, std::size_t filter,
                 const LabelParams& params, std::map<std::size_t, ForwardResult>& cache) {
  params.validate();
  const std::size_t m = std::min(params.top_m, norms.rows);
  const auto top = top_m_images(norms, filter, m);
  std::map<std::string, double> sums;
  const std::string background = data.vocabulary.empty() ? "" : data.vocabulary[0];
  for (auto idx : top) {
    const Sample& s = data.samples.at(idx);
    if (!s.mask) throw std::invalid_argument("label_filter: image '" + s.id + "' has no segmentation mask");
    auto it = cache.find(idx);
    if (it == cache.end()) it = cache.emplace(idx, forward(model, s.image)).first;
    const auto mask = filter_mask(it->second.feature_map(filter), s.mask->height, s.mask->width, params.percentile);
    for (const auto& [concept_name, iou] : iou_scores(mask, *s.mask, data.vocabulary)) {
      if (params.ignore_background && concept_name == background) continue;
      sums[concept_name] += iou;
    }
  }
  Scores sc;
  for (const auto& [c, v] : sums) sc.ranked.emplace_back(c, v / static_cast<double>(m));
  std::stable_sort(sc.ranked.begin(), sc.ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return sc;
}

std::vector<std::string> select_concepts(const Scores& sc, double beta) {
  std::vector<std::string> out;
  if (sc.ranked.empty() || sc.ranked.front().second <= 0) return {"unknown"};
  const double top = sc.ranked.front().second;
  for (const auto& [c, v] : sc.ranked)
    if (v >= beta * top) out.push_back(c);
  return out;
}

std::string compose_name(const std::vector<std::string>& concepts, std::map<std::string, std::size_t>& counters) {
  std::string name;
  for (const auto& c : concepts) {
    if (!name.empty()) name += '_';
    name += c + std::to_string(++counters[c]);
  }
  return name;
}

}  // namespace

FilterLabel label_filter(const CnnModel& model, const Dataset& data, const NormTable& norms, std::size_t filter,
                         const LabelParams& params) {
  std::map<std::size_t, ForwardResult> cache;
  const auto sc = aggregate(model, data, norms, filter, params, cache);
  FilterLabel label;
  label.filter = filter;
  label.scores = sc.ranked;
  label.concepts = select_concepts(sc, params.beta);
  std::map<std::string, std::size_t> counters;
  label.name = compose_name(label.concepts, counters);
  return label;
}

LabelMap label_all(const CnnModel& model, const Dataset& data, const NormTable& norms, const RuleSet& rs,
                   const LabelParams& params) {
  std::vector<std::size_t> filters;
  for (const auto& pred : rs.predicates()) {
    const auto k = parse_filter_predicate(pred);
    if (!k) throw std::invalid_argument("label_all: '" + pred + "' is not a filter predicate");
    if (*k >= norms.filters) throw std::out_of_range("label_all: filter " + pred + " exceeds the norm table");
    filters.push_back(*k);
  }
  std::sort(filters.begin(), filters.end());
  std::map<std::size_t, ForwardResult> cache;
  std::map<std::string, std::size_t> counters;
  LabelMap out;
  for (auto k : filters) {
    const auto sc = aggregate(model, data, norms, k, params, cache);
    FilterLabel label;
    label.filter = k;
    label.scores = sc.ranked;
    label.concepts = select_concepts(sc, params.beta);
    label.name = compose_name(label.concepts, counters);
    out.filters.emplace(filter_predicate(k), std::move(label));
  }
  return out;
}

void write_labels_csv(const LabelMap& labels, std::ostream& out) {
  out << "predicate,label,scores\n";
  std::vector<const FilterLabel*> ordered;
  for (const auto& [_, l] : labels.filters) ordered.push_back(&l);
  std::sort(ordered.begin(), ordered.end(), [](auto a, auto b) { return a->filter < b->filter; });
  for (const auto* l : ordered) {
    out << filter_predicate(l->filter) << ',' << l->name << ',';
    for (std::size_t i = 0; i < l->scores.size(); ++i) {
      if (i) out << ';';
      out << l->scores[i].first << ':' << std::setprecision(6) << l->scores[i].second;
    }
    out << '\n';
  }
}

LabelMap read_labels_csv(std::istream& in) {
  LabelMap labels;
  std::string line;
  if (!std::getline(in, line) || line.rfind("predicate,label", 0) != 0)
    throw std::invalid_argument("labels CSV must start with header 'predicate,label,scores'");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string pred, name, scores;
    if (!std::getline(row, pred, ',') || !std::getline(row, name, ','))
      throw std::invalid_argument("labels CSV line " + std::to_string(line_no) + " is malformed");
    std::getline(row, scores);
    const auto k = parse_filter_predicate(pred);
    if (!k) throw std::invalid_argument("labels CSV line " + std::to_string(line_no) + ": '" + pred + "' is not a filter predicate");
    FilterLabel l;
    l.filter = *k;
    l.name = name;
    l.concepts = label_tokens(name);
    std::stringstream sc(scores);
    std::string pair;
    while (std::getline(sc, pair, ';')) {
      const auto colon = pair.rfind(':');
      if (colon == std::string::npos) continue;
      l.scores.emplace_back(pair.substr(0, colon), std::stod(pair.substr(colon + 1)));
    }
    labels.filters.emplace(pred, std::move(l));
  }
  return labels;
}

}  // namespace nesybicor
