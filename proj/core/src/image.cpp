#include "turbsyn/image.hpp"

#include <algorithm>
#include <cmath>

namespace turbsyn {

Image to_luma(const Image& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3)
    throw ConfigError("to_luma expects 1 or 3 channels, got " +
                      std::to_string(img.channels));
  Image out(img.width, img.height, 1);
  for (size_t p = 0; p < img.pixel_count(); ++p) {
    const float* px = &img.data[p * 3];
    out.data[p] = 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2];
  }
  return out;
}

Grid channel_to_grid(const Image& img, int c) {
  Grid g(img.width, img.height);
  for (size_t p = 0; p < img.pixel_count(); ++p)
    g.data[p] = img.data[p * img.channels + c];
  return g;
}

void grid_to_channel(const Grid& g, Image& img, int c) {
  for (size_t p = 0; p < img.pixel_count(); ++p)
    img.data[p * img.channels + c] = static_cast<float>(g.data[p]);
}

double max_abs_difference(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ConfigError("image shape mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
  return m;
}

}  // namespace turbsyn
