#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace turbsyn {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Interleaved row-major float image, values nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c = 1)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, 0.0f) {}

  float& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// Row-major double grid for fields, kernels and covariance maps.
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Grid() = default;
  Grid(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const {
    return data[static_cast<size_t>(y) * width + x];
  }
  size_t size() const { return data.size(); }
};

// ITU-R 601 luma; pass-through for single-channel images.
Image to_luma(const Image& img);

// Extracts channel c as a Grid / writes it back.
Grid channel_to_grid(const Image& img, int c);
void grid_to_channel(const Grid& g, Image& img, int c);

double max_abs_difference(const Image& a, const Image& b);

}  // namespace turbsyn
