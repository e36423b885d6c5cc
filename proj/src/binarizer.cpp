#include "nesybicor/binarizer.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace nesybicor {

std::vector<Real> NormTable::row(std::size_t i) const {
  return {values.begin() + static_cast<std::ptrdiff_t>(i * filters),
          values.begin() + static_cast<std::ptrdiff_t>((i + 1) * filters)};
}

std::vector<Real> NormTable::column(std::size_t k) const {
  std::vector<Real> out(rows);
  for (std::size_t i = 0; i < rows; ++i) out[i] = at(i, k);
  return out;
}

std::vector<std::uint8_t> BinarizationTable::row(std::size_t i) const {
  return {bits.begin() + static_cast<std::ptrdiff_t>(i * cols()),
          bits.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols())};
}

std::string filter_predicate(std::size_t k) { return "f" + std::to_string(k); }

std::optional<std::size_t> parse_filter_predicate(const std::string& name) {
  if (name.size() < 2 || name[0] != 'f') return std::nullopt;
  std::size_t k = 0;
  const char* first = name.data() + 1;
  const char* last = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(first, last, k);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  if (name.size() > 2 && name[1] == '0') return std::nullopt;
  return k;
}

Real feature_norm(const Tensor& feature_map) {
  Real s = 0;
  for (Real v : feature_map.values()) s += v * v;
  return std::sqrt(s);
}

NormTable build_norm_table(const CnnModel& model, const Dataset& data) {
  NormTable t;
  t.rows = data.size();
  t.filters = model.config.filters;
  t.values.reserve(t.rows * t.filters);
  for (const auto& s : data.samples) {
    const auto r = forward(model, s.image);
    const std::size_t per = r.feature_maps.size() / t.filters;
    for (std::size_t k = 0; k < t.filters; ++k) {
      Real acc = 0;
      for (std::size_t j = 0; j < per; ++j) {
        const Real v = r.feature_maps[k * per + j];
        acc += v * v;
      }
      t.values.push_back(std::sqrt(acc));
    }
    t.labels.push_back(s.label);
    t.image_ids.push_back(s.id);
  }
  return t;
}

Thresholds compute_thresholds(const NormTable& table, const BinarizerParams& params) {
  if (table.rows == 0) throw std::invalid_argument("compute_thresholds: norm table has no rows");
  Thresholds theta(table.filters);
  const Real n = static_cast<Real>(table.rows);
  for (std::size_t k = 0; k < table.filters; ++k) {
    Real mean = 0;
    for (std::size_t i = 0; i < table.rows; ++i) mean += table.at(i, k);
    mean /= n;
    Real var = 0;
    for (std::size_t i = 0; i < table.rows; ++i) {
      const Real d = table.at(i, k) - mean;
      var += d * d;
    }
    var /= n;
    theta[k] = params.alpha * mean + params.gamma * std::sqrt(var);
  }
  return theta;
}

std::vector<std::uint8_t> binarize_norms(std::span<const Real> norms, const Thresholds& thresholds) {
  if (norms.size() != thresholds.size())
    throw std::invalid_argument("binarize: " + std::to_string(thresholds.size()) + " thresholds for " +
                                std::to_string(norms.size()) + " filters");
  std::vector<std::uint8_t> out(norms.size());
  for (std::size_t k = 0; k < norms.size(); ++k) out[k] = norms[k] > thresholds[k] ? 1 : 0;
  return out;
}

BinarizationTable binarize(const NormTable& table, const Thresholds& thresholds, std::vector<std::string> class_names) {
  if (thresholds.size() != table.filters)
    throw std::invalid_argument("binarize: " + std::to_string(thresholds.size()) + " thresholds for " +
                                std::to_string(table.filters) + " filters");
  BinarizationTable b;
  b.rows = table.rows;
  for (std::size_t k = 0; k < table.filters; ++k) b.columns.push_back(filter_predicate(k));
  b.bits.resize(table.rows * table.filters);
  for (std::size_t i = 0; i < table.rows; ++i)
    for (std::size_t k = 0; k < table.filters; ++k) b.bits[i * table.filters + k] = table.at(i, k) > thresholds[k];
  b.labels = table.labels;
  b.class_names = std::move(class_names);
  return b;
}

std::vector<std::uint8_t> binarize_image(const CnnModel& model, const Tensor& image, const Thresholds& thresholds) {
  const auto r = forward(model, image);
  std::vector<Real> norms(r.filter_count());
  for (std::size_t k = 0; k < norms.size(); ++k) norms[k] = feature_norm(r.flat_map(k));
  return binarize_norms(norms, thresholds);
}

void write_binarization_csv(const BinarizationTable& table, std::ostream& out) {
  for (const auto& c : table.columns) out << c << ',';
  out << "label\n";
  for (std::size_t i = 0; i < table.rows; ++i) {
    for (std::size_t k = 0; k < table.cols(); ++k) out << (table.at(i, k) ? '1' : '0') << ',';
    const auto label = table.labels[i];
    if (label < table.class_names.size())
      out << table.class_names[label];
    else
      out << label;
    out << '\n';
  }
}

BinarizationTable read_binarization_csv(std::istream& in) {
  BinarizationTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("binarization CSV is empty");
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) t.columns.push_back(cell);
    if (t.columns.empty() || t.columns.back() != "label")
      throw std::invalid_argument("binarization CSV header must end with 'label'");
    t.columns.pop_back();
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    for (std::size_t k = 0; k < t.cols(); ++k) {
      if (!std::getline(row, cell, ',') || (cell != "0" && cell != "1"))
        throw std::invalid_argument("binarization CSV line " + std::to_string(line_no) + ": expected 0/1 in column " +
                                    std::to_string(k + 1));
      t.bits.push_back(cell == "1");
    }
    if (!std::getline(row, cell)) throw std::invalid_argument("binarization CSV line " + std::to_string(line_no) + ": missing label");
    std::size_t idx = 0;
    auto found = std::find(t.class_names.begin(), t.class_names.end(), cell);
    if (found == t.class_names.end()) {
      t.class_names.push_back(cell);
      idx = t.class_names.size() - 1;
    } else {
      idx = static_cast<std::size_t>(found - t.class_names.begin());
    }
    t.labels.push_back(idx);
    ++t.rows;
  }
  return t;
}

}  // namespace nesybicor
