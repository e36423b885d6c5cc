#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nesybicor/tensor.hpp"

namespace nesybicor {

/// Per-pixel concept identifiers; identifier 0 is background.
struct SegMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> ids;

  std::uint8_t at(std::size_t y, std::size_t x) const { return ids[y * width + x]; }
  friend bool operator==(const SegMask&, const SegMask&) = default;
};

struct Sample {
  std::string id;
  Tensor image;  // [C,H,W], values in [0,1]
  std::size_t label = 0;
  std::optional<SegMask> mask;
};

enum class Split { Train, Validation, Test, MatchedTest };

std::string split_name(Split split);
Split parse_split(const std::string& name);

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<std::string> vocabulary;  // index = concept id
  std::vector<Sample> samples;
  Split split = Split::Train;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t class_count() const { return class_names.size(); }
  std::vector<std::size_t> labels() const;
  std::size_t class_index(const std::string& name) const;
  /// Most frequent label; ties go to the lower index.
  std::size_t majority_class() const;
};

}  // namespace nesybicor
