#pragma once

#include <string>

#include "hts/image.hpp"

namespace hts {

enum class TransformKind {
  identity,
  gaussian_blur,
  non_local_means,
  jpeg_like,
  bit_depth,
  halftone,
};

// A validated defense transform. Build instances through the make_* factories
// (they reject invalid parameters); the default-constructed value is the
// identity, which doubles as the BPDA surrogate.
struct Transform {
  TransformKind kind = TransformKind::identity;
  // gaussian_blur
  int kernel_size = 5;
  double sigma = 1.5;
  // non_local_means
  int patch_radius = 1;
  int search_radius = 5;
  double h_filter = 0.1;
  // jpeg_like
  int quality = 30;
  // bit_depth
  int bits = 1;
};

Transform make_identity();
Transform make_gaussian_blur(int kernel_size = 5, double sigma = 1.5);
Transform make_non_local_means(int patch_radius = 1, int search_radius = 5, double h_filter = 0.1);
Transform make_jpeg_like(int quality = 30);
Transform make_bit_depth(int bits = 1);
Transform make_halftone();

// Parses a kind name ("identity", "gaussian_blur", "non_local_means",
// "jpeg_like", "bit_depth", "halftone") with that kind's default parameters.
Transform transform_from_name(const std::string& name);
std::string transform_name(TransformKind kind);

// True for transforms that break gradients and get BPDA-wrapped attacks.
bool needs_bpda(TransformKind kind);

// Normalized Gaussian convolution with edge replication at borders.
Image gaussian_blur(const Image& img, int kernel_size = 5, double sigma = 1.5);

// bits=1 uses the shared halftone tie rule (0.5 -> 0); bits>=2 rounds to the
// uniform (2^b - 1)-level grid.
Image bit_depth_reduce(const Image& img, int bits = 1);

// DCT-domain quantization round trip per channel: 8x8 orthonormal DCT on
// values shifted by -0.5, coefficients quantized against the standard JPEG
// luminance table under the libjpeg quality scaling convention, then
// reconstructed. No chroma subsampling or entropy coding.
Image jpeg_like(const Image& img, int quality = 30);

// Gaussian-version non-local means: per-pixel weighted average over the
// search window, weights exp(-d^2/h^2) with d^2 the Gaussian-weighted mean
// squared patch difference.
Image non_local_means(const Image& img, int patch_radius = 1, int search_radius = 5,
                      double h_filter = 0.1);

Image apply(const Transform& t, const Image& img);

}  // namespace hts
