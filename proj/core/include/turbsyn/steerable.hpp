#pragma once

#include <complex>
#include <vector>

#include "turbsyn/image.hpp"

namespace turbsyn {

struct ComplexSubband {
  int width = 0;
  int height = 0;
  std::vector<std::complex<double>> values;
};

// Oriented complex (analytic) multi-scale decomposition built in the
// frequency domain: raised-cosine log-radial bands (one octave apart,
// level l centered at pi/2^l) times cos^{K-1} angular windows confined to
// a half plane. Level l is decimated by 2^{l-1} via spectrum folding.
// Inputs are reflect-padded to dimensions divisible by 2^{levels-1}.
std::vector<std::vector<ComplexSubband>> steerable_decompose(
    const Grid& image, int levels, int orientations);

}  // namespace turbsyn
