// Copyright 2026 The ARFNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "arfnet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <vector>

#include "arfnet/errors.hpp"

namespace arfnet::image_io {
namespace {

namespace fs = std::filesystem;

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Tensor from_rgb8(const std::vector<std::uint8_t>& rgb, std::size_t h, std::size_t w) {
  Tensor out({3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out[(c * h + y) * w + x] = rgb[(y * w + x) * 3 + c] / 255.0;
  return out;
}

std::vector<std::uint8_t> to_rgb8(const Tensor& image) {
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> rgb(h * w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        rgb[(y * w + x) * 3 + c] = quantize(image[(c * h + y) * w + x]);
  return rgb;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Tensor read_png(const fs::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("image_io: cannot open '" + path.string() + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("image_io: libpng init failed for '" + path.string() + "'");
  }
  std::vector<std::uint8_t> rgb;
  png_uint_32 w = 0, h = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("image_io: corrupt PNG '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("image_io: unsupported PNG layout in '" + path.string() + "'");
  }
  rgb.resize(static_cast<std::size_t>(w) * h * 3);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = rgb.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return from_rgb8(rgb, h, w);
}

void write_png(const fs::path& path, const Tensor& image) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("image_io: cannot create '" + path.string() + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("image_io: libpng init failed for '" + path.string() + "'");
  }
  std::vector<std::uint8_t> rgb = to_rgb8(image);
  const auto h = static_cast<png_uint_32>(image.dim(1));
  const auto w = static_cast<png_uint_32>(image.dim(2));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("image_io: failed writing '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (png_uint_32 y = 0; y < h; ++y) png_write_row(png, rgb.data() + static_cast<std::size_t>(y) * w * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Skips whitespace and '#' comments between PPM header tokens.
bool next_token(std::istream& in, std::string& tok) {
  tok.clear();
  char c;
  while (in.get(c)) {
    if (c == '#') {
      while (in.get(c) && c != '\n') {
      }
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      tok.push_back(c);
      break;
    }
  }
  while (in.get(c) && !std::isspace(static_cast<unsigned char>(c))) tok.push_back(c);
  return !tok.empty();
}

Tensor read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("image_io: cannot open '" + path.string() + "'");
  std::string magic, ws, hs, ms;
  if (!next_token(in, magic) || magic != "P6" || !next_token(in, ws) || !next_token(in, hs) ||
      !next_token(in, ms)) {
    throw IoError("image_io: '" + path.string() + "' is not a binary PPM");
  }
  std::size_t w, h;
  int maxval;
  try {
    w = std::stoul(ws);
    h = std::stoul(hs);
    maxval = std::stoi(ms);
  } catch (const std::exception&) {
    throw IoError("image_io: malformed PPM header in '" + path.string() + "'");
  }
  if (maxval != 255 || w == 0 || h == 0) {
    throw IoError("image_io: only 8-bit PPM is supported ('" + path.string() + "')");
  }
  std::vector<std::uint8_t> rgb(w * h * 3);
  in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(rgb.size())) {
    throw IoError("image_io: truncated PPM '" + path.string() + "'");
  }
  return from_rgb8(rgb, h, w);
}

void write_ppm(const fs::path& path, const Tensor& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("image_io: cannot create '" + path.string() + "'");
  out << "P6\n" << image.dim(2) << ' ' << image.dim(1) << "\n255\n";
  std::vector<std::uint8_t> rgb = to_rgb8(image);
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw IoError("image_io: failed writing '" + path.string() + "'");
}

}  // namespace

bool is_supported_image(const fs::path& path) {
  const std::string e = lower_ext(path);
  return e == ".png" || e == ".ppm";
}

Tensor read_image(const fs::path& path) {
  const std::string e = lower_ext(path);
  if (e == ".png") return read_png(path);
  if (e == ".ppm") return read_ppm(path);
  throw IoError("image_io: unsupported image format '" + path.string() + "'");
}

void write_image(const fs::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ConfigError("image_io: expected a (3, H, W) image, got " + shape_str(image.shape()));
  }
  const std::string e = lower_ext(path);
  if (e == ".png") return write_png(path, image);
  if (e == ".ppm") return write_ppm(path, image);
  throw IoError("image_io: unsupported image format '" + path.string() + "'");
}

}  // namespace arfnet::image_io
