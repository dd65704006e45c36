#include "turbsyn/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace turbsyn {

namespace {

// 5x7 bitmap glyphs, one byte per row, low 5 bits used.
const std::map<char, std::array<uint8_t, 7>>& font() {
  static const std::map<char, std::array<uint8_t, 7>> glyphs = {
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
      {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
      {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {'a', {0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F}},
      {'b', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x1E}},
      {'c', {0x00, 0x00, 0x0E, 0x10, 0x10, 0x11, 0x0E}},
      {'d', {0x01, 0x01, 0x0D, 0x13, 0x11, 0x11, 0x0F}},
      {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
      {'f', {0x06, 0x09, 0x08, 0x1C, 0x08, 0x08, 0x08}},
      {'g', {0x00, 0x0F, 0x11, 0x11, 0x0F, 0x01, 0x0E}},
      {'h', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x11}},
      {'i', {0x04, 0x00, 0x0C, 0x04, 0x04, 0x04, 0x0E}},
      {'j', {0x02, 0x00, 0x06, 0x02, 0x02, 0x12, 0x0C}},
      {'k', {0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12}},
      {'l', {0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'m', {0x00, 0x00, 0x1A, 0x15, 0x15, 0x11, 0x11}},
      {'n', {0x00, 0x00, 0x16, 0x19, 0x11, 0x11, 0x11}},
      {'o', {0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E}},
      {'p', {0x00, 0x00, 0x1E, 0x11, 0x1E, 0x10, 0x10}},
      {'q', {0x00, 0x00, 0x0D, 0x13, 0x0F, 0x01, 0x01}},
      {'r', {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10}},
      {'s', {0x00, 0x00, 0x0E, 0x10, 0x0E, 0x01, 0x1E}},
      {'t', {0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06}},
      {'u', {0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0D}},
      {'v', {0x00, 0x00, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'w', {0x00, 0x00, 0x11, 0x11, 0x15, 0x15, 0x0A}},
      {'x', {0x00, 0x00, 0x11, 0x0A, 0x04, 0x0A, 0x11}},
      {'y', {0x00, 0x00, 0x11, 0x11, 0x0F, 0x01, 0x0E}},
      {'z', {0x00, 0x00, 0x1F, 0x02, 0x04, 0x08, 0x1F}},
  };
  return glyphs;
}

void put_pixel(Image& img, int x, int y, std::array<uint8_t, 3> c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  img.at(x, y, 0) = c[0] / 255.0f;
  img.at(x, y, 1) = c[1] / 255.0f;
  img.at(x, y, 2) = c[2] / 255.0f;
}

void draw_text(Image& img, int x, int y, const std::string& text,
               std::array<uint8_t, 3> c) {
  for (char raw : text) {
    char ch = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    auto it = font().find(ch);
    if (it != font().end()) {
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if (it->second[row] & (1 << (4 - col)))
            put_pixel(img, x + col, y + row, c);
    }
    x += 6;
  }
}

void draw_hline(Image& img, int x0, int x1, int y, std::array<uint8_t, 3> c) {
  for (int x = x0; x <= x1; ++x) put_pixel(img, x, y, c);
}
void draw_vline(Image& img, int x, int y0, int y1, std::array<uint8_t, 3> c) {
  for (int y = y0; y <= y1; ++y) put_pixel(img, x, y, c);
}

std::string format_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

AxisRange compute_axis_range(const std::vector<double>& values) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (hi <= lo) return {lo - 0.5, lo + 0.5};
  double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

Image render_scatter_panels(const std::string& x_label,
                            const std::vector<PlotSeries>& series,
                            int panel_width, int panel_height) {
  if (series.empty()) throw ConfigError("render_scatter_panels: no series");
  int cols = series.size() > 1 ? 2 : 1;
  int rows = (static_cast<int>(series.size()) + cols - 1) / cols;

  Image img(cols * panel_width, rows * panel_height, 3);
  std::fill(img.data.begin(), img.data.end(), 1.0f);
  const std::array<uint8_t, 3> black{0, 0, 0};
  const std::array<uint8_t, 3> grey{180, 180, 180};

  for (size_t s = 0; s < series.size(); ++s) {
    const PlotSeries& ps = series[s];
    int ox = static_cast<int>(s) % cols * panel_width;
    int oy = static_cast<int>(s) / cols * panel_height;
    int ml = 58, mr = 14, mt = 24, mb = 40;
    int px0 = ox + ml, px1 = ox + panel_width - mr;
    int py0 = oy + mt, py1 = oy + panel_height - mb;

    AxisRange xr = compute_axis_range(ps.x);
    AxisRange yr = compute_axis_range(ps.y);
    auto map_x = [&](double v) {
      return px0 + static_cast<int>((v - xr.lo) / (xr.hi - xr.lo) *
                                    (px1 - px0));
    };
    auto map_y = [&](double v) {
      return py1 - static_cast<int>((v - yr.lo) / (yr.hi - yr.lo) *
                                    (py1 - py0));
    };

    draw_hline(img, px0, px1, py1, black);
    draw_vline(img, px0, py0, py1, black);
    for (int t = 0; t <= 4; ++t) {
      double fx = xr.lo + (xr.hi - xr.lo) * t / 4.0;
      double fy = yr.lo + (yr.hi - yr.lo) * t / 4.0;
      int tx = map_x(fx), ty = map_y(fy);
      draw_vline(img, tx, py1, py1 + 3, black);
      draw_text(img, tx - 12, py1 + 6, format_tick(fx), black);
      draw_hline(img, px0 - 3, px0, ty, black);
      draw_text(img, ox + 4, ty - 3, format_tick(fy), black);
      if (t > 0 && t < 4) {
        draw_hline(img, px0, px1, ty, grey);
      }
    }
    draw_text(img, (px0 + px1) / 2 - 3 * static_cast<int>(x_label.size()),
              py1 + 20, x_label, black);
    draw_text(img, px0 + 6, py0 - 16, ps.name, ps.color);

    for (size_t i = 0; i < ps.x.size() && i < ps.y.size(); ++i) {
      if (!std::isfinite(ps.x[i]) || !std::isfinite(ps.y[i])) continue;
      int cx = map_x(ps.x[i]), cy = map_y(ps.y[i]);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) put_pixel(img, cx + dx, cy + dy,
                                                   ps.color);
    }
  }
  return img;
}

}  // namespace turbsyn
