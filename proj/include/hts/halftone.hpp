#pragma once

#include <vector>

#include "hts/image.hpp"

namespace hts {

// Causal error-diffusion stencil. `anchor` marks the pixel being scanned;
// weights at or before the anchor in raster order must be zero, so error
// never flows backward against the scan.
struct ErrorFilter {
  int rows = 0;
  int cols = 0;
  int anchor_row = 0;
  int anchor_col = 0;
  std::vector<double> weights;  // row-major, rows*cols

  double weight(int r, int c) const { return weights[static_cast<size_t>(r) * cols + c]; }
  // Throws ConfigError if the causal-support invariant is violated.
  void validate() const;
};

// The (7,3,5,1)/16 stencil: right, below-left, below, below-right.
const ErrorFilter& floyd_steinberg_filter();

struct HalftoneResult {
  Image image;           // binary per channel, values in {0.0, 1.0}
  double dropped_error;  // error mass pushed outside the image bounds
};

// Threshold 0.5, strict greater-than: 1.0 iff value > 0.5.
// Input may lie outside [0,1] after error accumulation.
double quantize(double value);

// Raster-order error diffusion of each channel independently. The input is
// never mutated; quantization error is pushed through `filter`, and pushes
// that land out of bounds accumulate in dropped_error. After the full scan
// sum(input) - sum(output) == dropped_error up to float rounding.
HalftoneResult error_diffuse(const Image& img, const ErrorFilter& filter);

HalftoneResult floyd_steinberg(const Image& img);

}  // namespace hts
