#pragma once

#include <string>
#include <vector>

#include "hts/errors.hpp"

namespace hts {

// Dense image of unit-interval intensities.
//
// Storage is planar, channel-major: data[c*H*W + r*W + col]. This matches the
// CIFAR-10 binary layout and lets per-channel transforms run over contiguous
// planes.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;  // 1 (grayscale) or 3 (RGB)
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0);

  double& at(int c, int r, int col) { return data[(static_cast<size_t>(c) * height + r) * width + col]; }
  double at(int c, int r, int col) const { return data[(static_cast<size_t>(c) * height + r) * width + col]; }

  size_t size() const { return data.size(); }
  double sum() const;
};

struct LabeledExample {
  Image image;
  int label = 0;
};

// Raster traversal position: rows top to bottom, columns left to right.
struct RasterCursor {
  int row = 0;
  int col = 0;
};

// Binary PGM (P5) / PPM (P6) with maxval 255. Values map as byte/255.0.
Image load_ppm(const std::string& path);

// Writes P5 for 1-channel, P6 for 3-channel images. Bytes are
// round-half-up of v*255, clamped to [0,255].
void save_ppm(const Image& img, const std::string& path);

// CIFAR-10 binary batch: 3073-byte records (label byte + 3072 planar RGB
// bytes, 32x32). Reads at most max_records examples.
std::vector<LabeledExample> load_cifar10_batch(const std::string& path, size_t max_records);

// Clamps every value to [0,1].
Image clamp_unit(Image img);

}  // namespace hts
