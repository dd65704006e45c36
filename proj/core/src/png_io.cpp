#include "turbsyn/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

namespace turbsyn {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image read_png(const std::filesystem::path& file) {
  FilePtr fp(std::fopen(file.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + file.string());

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode " + file.string());
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 width = png_get_image_width(png, info);
  png_uint_32 height = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // stored big-endian
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  color_type = png_get_color_type(png, info);
  int channels = (color_type == PNG_COLOR_TYPE_RGB) ? 3 : 1;

  std::vector<png_byte> row(png_get_rowbytes(png, info));
  Image img(static_cast<int>(width), static_cast<int>(height), channels);
  double scale = bit_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (png_uint_32 y = 0; y < height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < width * channels; ++x) {
      double v = bit_depth == 16
                     ? reinterpret_cast<const uint16_t*>(row.data())[x]
                     : row[x];
      img.data[static_cast<size_t>(y) * width * channels + x] =
          static_cast<float>(v * scale);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::filesystem::path& file, const Image& img,
               int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16)
    throw ConfigError("PNG bit depth must be 8 or 16");
  if (img.channels != 1 && img.channels != 3)
    throw ConfigError("PNG writer expects 1 or 3 channels");
  if (img.width <= 0 || img.height <= 0)
    throw ConfigError("PNG writer: empty image");

  FilePtr fp(std::fopen(file.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + file.string());

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode " + file.string());
  }

  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, img.width, img.height, bit_depth,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);

  size_t row_values = static_cast<size_t>(img.width) * img.channels;
  double maxv = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<uint8_t> row8(row_values);
  std::vector<uint16_t> row16(row_values);
  for (int y = 0; y < img.height; ++y) {
    const float* src = &img.data[static_cast<size_t>(y) * row_values];
    if (bit_depth == 8) {
      for (size_t x = 0; x < row_values; ++x) {
        double v = std::clamp(static_cast<double>(src[x]), 0.0, 1.0);
        row8[x] = static_cast<uint8_t>(std::lround(v * maxv));
      }
      png_write_row(png, row8.data());
    } else {
      for (size_t x = 0; x < row_values; ++x) {
        double v = std::clamp(static_cast<double>(src[x]), 0.0, 1.0);
        row16[x] = static_cast<uint16_t>(std::lround(v * maxv));
      }
      png_write_row(png, reinterpret_cast<png_bytep>(row16.data()));
    }
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace turbsyn
