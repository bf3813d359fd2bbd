#include "hts/halftone.hpp"

#include <cmath>
#include <string>

namespace hts {

void ErrorFilter::validate() const {
  if (rows <= 0 || cols <= 0 || weights.size() != static_cast<size_t>(rows) * cols) {
    throw ConfigError("ErrorFilter: inconsistent stencil dimensions");
  }
  if (anchor_row < 0 || anchor_row >= rows || anchor_col < 0 || anchor_col >= cols) {
    throw ConfigError("ErrorFilter: anchor outside stencil");
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      bool at_or_before = r < anchor_row || (r == anchor_row && c <= anchor_col);
      if (at_or_before && weight(r, c) != 0.0) {
        throw ConfigError("ErrorFilter: nonzero weight at (" + std::to_string(r) +
                          "," + std::to_string(c) + ") is at or before the anchor");
      }
    }
  }
}

const ErrorFilter& floyd_steinberg_filter() {
  static const ErrorFilter fs = [] {
    ErrorFilter f;
    f.rows = 2;
    f.cols = 3;
    f.anchor_row = 0;
    f.anchor_col = 1;
    f.weights = {0.0, 0.0, 7.0 / 16.0,
                 3.0 / 16.0, 5.0 / 16.0, 1.0 / 16.0};
    f.validate();
    return f;
  }();
  return fs;
}

double quantize(double value) { return value > 0.5 ? 1.0 : 0.0; }

HalftoneResult error_diffuse(const Image& img, const ErrorFilter& filter) {
  filter.validate();

  HalftoneResult res;
  res.image = Image(img.height, img.width, img.channels);
  res.dropped_error = 0.0;

  const int H = img.height, W = img.width;
  for (int c = 0; c < img.channels; ++c) {
    // Working plane accumulates pulled error on top of the input values.
    std::vector<double> working(static_cast<size_t>(H) * W);
    for (int r = 0; r < H; ++r)
      for (int col = 0; col < W; ++col)
        working[static_cast<size_t>(r) * W + col] = img.at(c, r, col);

    for (int r = 0; r < H; ++r) {
      for (int col = 0; col < W; ++col) {
        double old_value = working[static_cast<size_t>(r) * W + col];
        double new_value = quantize(old_value);
        res.image.at(c, r, col) = new_value;
        double err = old_value - new_value;
        if (err == 0.0) continue;
        for (int fr = 0; fr < filter.rows; ++fr) {
          for (int fc = 0; fc < filter.cols; ++fc) {
            double w = filter.weight(fr, fc);
            if (w == 0.0) continue;
            int tr = r + (fr - filter.anchor_row);
            int tc = col + (fc - filter.anchor_col);
            if (tr >= 0 && tr < H && tc >= 0 && tc < W) {
              working[static_cast<size_t>(tr) * W + tc] += w * err;
            } else {
              res.dropped_error += w * err;
            }
          }
        }
      }
    }
  }
  return res;
}

HalftoneResult floyd_steinberg(const Image& img) {
  return error_diffuse(img, floyd_steinberg_filter());
}

}  // namespace hts
