#include "nesybicor/dataset.hpp"

#include <stdexcept>

namespace nesybicor {

std::string split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
    case Split::MatchedTest: return "test_matched";
  }
  return "unknown";
}

Split parse_split(const std::string& name) {
  for (Split s : {Split::Train, Split::Validation, Split::Test, Split::MatchedTest})
    if (split_name(s) == name) return s;
  throw std::invalid_argument("unknown split '" + name + "'");
}

std::vector<std::size_t> Dataset::labels() const {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::size_t Dataset::class_index(const std::string& name) const {
  for (std::size_t i = 0; i < class_names.size(); ++i)
    if (class_names[i] == name) return i;
  throw std::invalid_argument("unknown class '" + name + "'");
}

std::size_t Dataset::majority_class() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const auto& s : samples)
    if (s.label < counts.size()) ++counts[s.label];
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[best]) best = c;
  return best;
}

}  // namespace nesybicor
