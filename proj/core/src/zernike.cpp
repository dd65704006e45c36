#include "turbsyn/zernike.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace turbsyn {

namespace {

// Noll enumeration: radial order n ascending; within n, |m| ascending;
// each m > 0 contributes a cosine mode (even j) and a sine mode (odd j).
std::array<NollIndex, kNumModes> build_noll_table() {
  std::array<NollIndex, kNumModes> table{};
  int j = 1;
  for (int n = 0; j <= kNumModes; ++n) {
    for (int m = n % 2; m <= n && j <= kNumModes; m += 2) {
      if (m == 0) {
        table[j - 1] = {j, n, 0, Trig::kNone};
        ++j;
        continue;
      }
      // Pair of modes; parity of the first free slot decides which of
      // cos/sin it takes.
      bool first_even = (j % 2 == 0);
      table[j - 1] = {j, n, m, first_even ? Trig::kCos : Trig::kSin};
      if (j + 1 <= kNumModes)
        table[j] = {j + 1, n, m, first_even ? Trig::kSin : Trig::kCos};
      j += 2;
    }
  }
  return table;
}

const std::array<NollIndex, kNumModes>& noll_table() {
  static const auto table = build_noll_table();
  return table;
}

double radial_poly(int n, int m, double rho) {
  // Explicit factorial sum; exact for the small orders used here.
  auto fact = [](int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
  };
  double sum = 0.0;
  for (int k = 0; k <= (n - m) / 2; ++k) {
    double num = (k % 2 ? -1.0 : 1.0) * fact(n - k);
    double den = fact(k) * fact((n + m) / 2 - k) * fact((n - m) / 2 - k);
    sum += num / den * std::pow(rho, n - 2 * k);
  }
  return sum;
}

}  // namespace

NollIndex noll_to_nm(int j) {
  if (j < 1 || j > kNumModes)
    throw std::out_of_range("Noll index out of range 1..36: " +
                            std::to_string(j));
  return noll_table()[j - 1];
}

double zernike_value(const NollIndex& idx, double rho, double theta) {
  double r = radial_poly(idx.n, idx.m, rho);
  if (idx.m == 0) return std::sqrt(idx.n + 1.0) * r;
  double norm = std::sqrt(2.0 * (idx.n + 1.0));
  double angle = idx.m * theta;
  return norm * r *
         (idx.trig == Trig::kCos ? std::cos(angle) : std::sin(angle));
}

ZernikeBasis evaluate_basis(int grid_size) {
  if (grid_size < 16 || grid_size % 2 != 0)
    throw ConfigError("Zernike grid must be even and >= 16, got " +
                      std::to_string(grid_size));
  ZernikeBasis basis;
  basis.grid_size = grid_size;
  basis.mask.assign(static_cast<size_t>(grid_size) * grid_size, 0);
  basis.modes.assign(kNumModes, Grid(grid_size, grid_size));

  for (int y = 0; y < grid_size; ++y) {
    for (int x = 0; x < grid_size; ++x) {
      double px = (2.0 * x + 1.0) / grid_size - 1.0;
      double py = (2.0 * y + 1.0) / grid_size - 1.0;
      double rho = std::hypot(px, py);
      if (rho > 1.0) continue;
      size_t idx = static_cast<size_t>(y) * grid_size + x;
      basis.mask[idx] = 1;
      ++basis.mask_area;
      double theta = std::atan2(py, px);
      for (int j = 1; j <= kNumModes; ++j)
        basis.modes[j - 1].at(x, y) = zernike_value(noll_to_nm(j), rho, theta);
    }
  }
  return basis;
}

double ZernikeBasis::inner(int ji, int jj) const {
  const Grid& a = modes[ji - 1];
  const Grid& b = modes[jj - 1];
  double sum = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (mask[i]) sum += a.data[i] * b.data[i];
  return sum / static_cast<double>(mask_area);
}

double strength_scale(double d_over_r0) {
  return std::pow(d_over_r0, 5.0 / 3.0);
}

}  // namespace turbsyn
