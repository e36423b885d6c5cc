#pragma once

// PNG images and masks, and the on-disk dataset layout:
//   <root>/vocabulary.txt            id,name per line
//   <root>/classes.txt               one class name per line, in label order
//   <root>/<split>/<class>/<id>.png  RGB image
//   <root>/<split>/<class>/<id>.mask.png  8-bit concept ids

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "nesybicor/dataset.hpp"

namespace nesybicor {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;  // interleaved rows
};

void write_png(const std::filesystem::path& path, const Image8& image);
/// Grey or RGB(A) input; alpha is dropped, palette and 16-bit input are expanded.
Image8 read_png(const std::filesystem::path& path);

Image8 to_image8(const Tensor& chw);
Tensor from_image8(const Image8& image);

/// Writes one split; vocabulary.txt and classes.txt are (re)written at the root.
void save_dataset(const Dataset& data, const std::filesystem::path& root);
/// Masks are attached when present; missing masks leave Sample::mask empty.
Dataset load_dataset(const std::filesystem::path& root, Split split);

}  // namespace nesybicor
