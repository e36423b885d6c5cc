#include "nesybicor/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace nesybicor {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open(const fs::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageIoError("cannot open '" + path.string() + "'");
  return f;
}

}  // namespace

void write_png(const fs::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) throw ImageIoError("write_png: 1 or 3 channels expected");
  if (image.pixels.size() != image.width * image.height * image.channels)
    throw ImageIoError("write_png: pixel buffer does not match dimensions");
  File f = open(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("failed writing '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = image.width * image.channels;
  for (std::size_t y = 0; y < image.height; ++y)
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image8 read_png(const fs::path& path) {
  File f = open(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw ImageIoError("'" + path.string() + "' is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("libpng initialisation failed");
  }
  Image8 img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("corrupt PNG '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto type = png_get_color_type(png, info);
  if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.channels = png_get_channels(png, info);
  img.pixels.resize(img.width * img.height * img.channels);
  std::vector<png_bytep> rows(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + y * img.width * img.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

Image8 to_image8(const Tensor& chw) {
  if (chw.rank() != 3 || (chw.dim(0) != 1 && chw.dim(0) != 3))
    throw ShapeError("to_image8 expects [1|3,H,W], got " + shape_string(chw.shape()));
  Image8 img{chw.dim(2), chw.dim(1), chw.dim(0), {}};
  img.pixels.resize(chw.size());
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        const double v = std::clamp(chw.at(c, y, x), 0.0, 1.0) * 255.0;
        img.pixels[(y * img.width + x) * img.channels + c] = static_cast<std::uint8_t>(std::lround(v));
      }
  return img;
}

Tensor from_image8(const Image8& img) {
  Tensor t({img.channels, img.height, img.width});
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x)
        t[(c * img.height + y) * img.width + x] =
            static_cast<Real>(img.pixels[(y * img.width + x) * img.channels + c]) / 255.0;
  return t;
}

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ImageIoError("cannot read '" + path.string() + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

}  // namespace

void save_dataset(const Dataset& data, const fs::path& root) {
  fs::create_directories(root);
  {
    std::ofstream voc(root / "vocabulary.txt");
    for (std::size_t i = 0; i < data.vocabulary.size(); ++i) voc << i << ',' << data.vocabulary[i] << '\n';
    std::ofstream cls(root / "classes.txt");
    for (const auto& c : data.class_names) cls << c << '\n';
    if (!voc || !cls) throw ImageIoError("cannot write dataset metadata under '" + root.string() + "'");
  }
  const fs::path split_dir = root / split_name(data.split);
  for (const auto& c : data.class_names) fs::create_directories(split_dir / c);
  for (const auto& s : data.samples) {
    const fs::path dir = split_dir / data.class_names.at(s.label);
    write_png(dir / (s.id + ".png"), to_image8(s.image));
    if (s.mask) write_png(dir / (s.id + ".mask.png"), Image8{s.mask->width, s.mask->height, 1, s.mask->ids});
  }
}

Dataset load_dataset(const fs::path& root, Split split) {
  Dataset data;
  data.split = split;
  data.class_names = read_lines(root / "classes.txt");
  for (const auto& line : read_lines(root / "vocabulary.txt")) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ImageIoError("vocabulary.txt: expected 'id,name', got '" + line + "'");
    const auto id = std::stoul(line.substr(0, comma));
    if (id >= 256) throw ImageIoError("vocabulary.txt: concept id " + std::to_string(id) + " exceeds 255");
    if (data.vocabulary.size() <= id) data.vocabulary.resize(id + 1);
    data.vocabulary[id] = line.substr(comma + 1);
  }
  const fs::path split_dir = root / split_name(split);
  if (!fs::is_directory(split_dir)) throw ImageIoError("no split directory '" + split_dir.string() + "'");
  for (std::size_t c = 0; c < data.class_names.size(); ++c) {
    const fs::path dir = split_dir / data.class_names[c];
    if (!fs::is_directory(dir)) continue;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (e.path().extension() == ".png" && name.find(".mask.png") == std::string::npos) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Sample s;
      s.id = f.stem().string();
      s.label = c;
      s.image = from_image8(read_png(f));
      const fs::path mask_path = dir / (s.id + ".mask.png");
      if (fs::exists(mask_path)) {
        const auto m = read_png(mask_path);
        if (m.channels != 1) throw ImageIoError("mask '" + mask_path.string() + "' is not single-channel");
        if (m.width != s.image.dim(2) || m.height != s.image.dim(1))
          throw ImageIoError("mask '" + mask_path.string() + "' does not match its image size");
        s.mask = SegMask{m.height, m.width, m.pixels};
      }
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

}  // namespace nesybicor
