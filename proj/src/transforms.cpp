#include "hts/transforms.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "hts/halftone.hpp"

namespace hts {

Transform make_identity() { return Transform{}; }

Transform make_gaussian_blur(int kernel_size, double sigma) {
  if (kernel_size <= 0 || kernel_size % 2 == 0) {
    throw ConfigError("gaussian_blur: kernel size must be odd, got " +
                      std::to_string(kernel_size));
  }
  if (sigma <= 0.0) throw ConfigError("gaussian_blur: sigma must be positive");
  Transform t;
  t.kind = TransformKind::gaussian_blur;
  t.kernel_size = kernel_size;
  t.sigma = sigma;
  return t;
}

Transform make_non_local_means(int patch_radius, int search_radius, double h_filter) {
  if (patch_radius < 1 || search_radius < 1) {
    throw ConfigError("non_local_means: radii must be >= 1");
  }
  if (h_filter <= 0.0) throw ConfigError("non_local_means: h must be positive");
  Transform t;
  t.kind = TransformKind::non_local_means;
  t.patch_radius = patch_radius;
  t.search_radius = search_radius;
  t.h_filter = h_filter;
  return t;
}

Transform make_jpeg_like(int quality) {
  if (quality < 1 || quality > 100) {
    throw ConfigError("jpeg_like: quality must be in [1,100], got " + std::to_string(quality));
  }
  Transform t;
  t.kind = TransformKind::jpeg_like;
  t.quality = quality;
  return t;
}

Transform make_bit_depth(int bits) {
  if (bits < 1) throw ConfigError("bit_depth: bits must be >= 1");
  Transform t;
  t.kind = TransformKind::bit_depth;
  t.bits = bits;
  return t;
}

Transform make_halftone() {
  Transform t;
  t.kind = TransformKind::halftone;
  return t;
}

Transform transform_from_name(const std::string& name) {
  if (name == "identity") return make_identity();
  if (name == "gaussian_blur") return make_gaussian_blur();
  if (name == "non_local_means") return make_non_local_means();
  if (name == "jpeg_like") return make_jpeg_like();
  if (name == "bit_depth") return make_bit_depth();
  if (name == "halftone") return make_halftone();
  throw ConfigError("unknown transform kind '" + name + "'");
}

std::string transform_name(TransformKind kind) {
  switch (kind) {
    case TransformKind::identity: return "identity";
    case TransformKind::gaussian_blur: return "gaussian_blur";
    case TransformKind::non_local_means: return "non_local_means";
    case TransformKind::jpeg_like: return "jpeg_like";
    case TransformKind::bit_depth: return "bit_depth";
    case TransformKind::halftone: return "halftone";
  }
  return "?";
}

bool needs_bpda(TransformKind kind) {
  return kind == TransformKind::jpeg_like || kind == TransformKind::bit_depth ||
         kind == TransformKind::halftone;
}

namespace {

inline int reflect_clamp(int i, int n) { return std::clamp(i, 0, n - 1); }  // edge replication

}  // namespace

Image gaussian_blur(const Image& img, int kernel_size, double sigma) {
  Transform t = make_gaussian_blur(kernel_size, sigma);  // validates
  const int k = t.kernel_size;
  const int rad = k / 2;

  std::vector<double> kernel(static_cast<size_t>(k) * k);
  double ksum = 0.0;
  for (int dy = -rad; dy <= rad; ++dy)
    for (int dx = -rad; dx <= rad; ++dx) {
      double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      kernel[static_cast<size_t>(dy + rad) * k + (dx + rad)] = w;
      ksum += w;
    }
  for (double& w : kernel) w /= ksum;

  Image out(img.height, img.width, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int r = 0; r < img.height; ++r)
      for (int col = 0; col < img.width; ++col) {
        double acc = 0.0;
        for (int dy = -rad; dy <= rad; ++dy)
          for (int dx = -rad; dx <= rad; ++dx) {
            int sr = reflect_clamp(r + dy, img.height);
            int sc = reflect_clamp(col + dx, img.width);
            acc += kernel[static_cast<size_t>(dy + rad) * k + (dx + rad)] * img.at(c, sr, sc);
          }
        out.at(c, r, col) = std::clamp(acc, 0.0, 1.0);
      }
  return out;
}

Image bit_depth_reduce(const Image& img, int bits) {
  make_bit_depth(bits);  // validates
  Image out = img;
  if (bits == 1) {
    for (double& v : out.data) v = quantize(v);
  } else {
    double levels = std::pow(2.0, bits) - 1.0;
    for (double& v : out.data) v = std::round(v * levels) / levels;
  }
  return out;
}

namespace {

// Standard JPEG luminance quantization table.
constexpr std::array<int, 64> kLumaQuant = {
    16, 11, 10, 16, 24,  40,  51,  61,
    12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,
    14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,
    24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99};

std::array<double, 64> scaled_quant_table(int quality) {
  double scale = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
  std::array<double, 64> q;
  for (int i = 0; i < 64; ++i) {
    double v = std::floor((kLumaQuant[i] * scale + 50.0) / 100.0);
    q[i] = std::clamp(v, 1.0, 255.0);
  }
  return q;
}

// Orthonormal type-II DCT basis: basis[u][n] = a(u) cos(pi (2n+1) u / 16).
const std::array<std::array<double, 8>, 8>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<double, 8>, 8> b{};
    const double pi = std::acos(-1.0);
    for (int u = 0; u < 8; ++u) {
      double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) b[u][n] = a * std::cos(pi * (2 * n + 1) * u / 16.0);
    }
    return b;
  }();
  return basis;
}

}  // namespace

Image jpeg_like(const Image& img, int quality) {
  make_jpeg_like(quality);  // validates
  const auto q = scaled_quant_table(quality);
  const auto& B = dct_basis();

  const int H = img.height, W = img.width;
  const int ph = (H + 7) / 8 * 8;
  const int pw = (W + 7) / 8 * 8;

  Image out(H, W, img.channels);
  std::vector<double> plane(static_cast<size_t>(ph) * pw);
  for (int c = 0; c < img.channels; ++c) {
    // Pad by edge replication, shift to zero-centered values.
    for (int r = 0; r < ph; ++r)
      for (int col = 0; col < pw; ++col)
        plane[static_cast<size_t>(r) * pw + col] =
            img.at(c, reflect_clamp(r, H), reflect_clamp(col, W)) - 0.5;

    for (int br = 0; br < ph; br += 8) {
      for (int bc = 0; bc < pw; bc += 8) {
        double block[8][8], tmp[8][8], coef[8][8];
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j)
            block[i][j] = plane[static_cast<size_t>(br + i) * pw + (bc + j)];

        // Separable forward DCT: rows then columns.
        for (int i = 0; i < 8; ++i)
          for (int u = 0; u < 8; ++u) {
            double s = 0.0;
            for (int j = 0; j < 8; ++j) s += B[u][j] * block[i][j];
            tmp[i][u] = s;
          }
        for (int u = 0; u < 8; ++u)
          for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int i = 0; i < 8; ++i) s += B[u][i] * tmp[i][v];
            coef[u][v] = s;
          }

        for (int u = 0; u < 8; ++u)
          for (int v = 0; v < 8; ++v) {
            double qs = q[u * 8 + v];
            coef[u][v] = std::round(coef[u][v] * 255.0 / qs) * qs / 255.0;
          }

        // Inverse (transpose of the orthonormal transform).
        for (int u = 0; u < 8; ++u)
          for (int j = 0; j < 8; ++j) {
            double s = 0.0;
            for (int v = 0; v < 8; ++v) s += B[v][j] * coef[u][v];
            tmp[u][j] = s;
          }
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            double s = 0.0;
            for (int u = 0; u < 8; ++u) s += B[u][i] * tmp[u][j];
            plane[static_cast<size_t>(br + i) * pw + (bc + j)] = s;
          }
      }
    }

    for (int r = 0; r < H; ++r)
      for (int col = 0; col < W; ++col)
        out.at(c, r, col) = std::clamp(plane[static_cast<size_t>(r) * pw + col] + 0.5, 0.0, 1.0);
  }
  return out;
}

Image non_local_means(const Image& img, int patch_radius, int search_radius, double h_filter) {
  make_non_local_means(patch_radius, search_radius, h_filter);  // validates
  const int H = img.height, W = img.width;
  const int pr = patch_radius, sr = search_radius;

  // Gaussian patch weights, normalized to mean 1 in the d^2 average.
  const int pk = 2 * pr + 1;
  std::vector<double> pw(static_cast<size_t>(pk) * pk);
  double pw_sum = 0.0;
  double sigma_p = std::max(1.0, pr / 2.0);
  for (int dy = -pr; dy <= pr; ++dy)
    for (int dx = -pr; dx <= pr; ++dx) {
      double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_p * sigma_p));
      pw[static_cast<size_t>(dy + pr) * pk + (dx + pr)] = w;
      pw_sum += w;
    }

  const double inv_h2 = 1.0 / (h_filter * h_filter);
  Image out(H, W, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    for (int r = 0; r < H; ++r) {
      for (int col = 0; col < W; ++col) {
        double wsum = 0.0, acc = 0.0;
        for (int qr = r - sr; qr <= r + sr; ++qr) {
          for (int qc = col - sr; qc <= col + sr; ++qc) {
            if (qr < 0 || qr >= H || qc < 0 || qc >= W) continue;
            // Gaussian-weighted mean squared patch difference.
            double d2 = 0.0;
            for (int dy = -pr; dy <= pr; ++dy)
              for (int dx = -pr; dx <= pr; ++dx) {
                double a = img.at(c, reflect_clamp(r + dy, H), reflect_clamp(col + dx, W));
                double b = img.at(c, reflect_clamp(qr + dy, H), reflect_clamp(qc + dx, W));
                d2 += pw[static_cast<size_t>(dy + pr) * pk + (dx + pr)] * (a - b) * (a - b);
              }
            d2 /= pw_sum;
            double w = std::exp(-d2 * inv_h2);  // sigma_n = 0
            wsum += w;
            acc += w * img.at(c, qr, qc);
          }
        }
        out.at(c, r, col) = acc / wsum;
      }
    }
  }
  return out;
}

Image apply(const Transform& t, const Image& img) {
  switch (t.kind) {
    case TransformKind::identity:
      return img;
    case TransformKind::gaussian_blur:
      return gaussian_blur(img, t.kernel_size, t.sigma);
    case TransformKind::non_local_means:
      return non_local_means(img, t.patch_radius, t.search_radius, t.h_filter);
    case TransformKind::jpeg_like:
      return jpeg_like(img, t.quality);
    case TransformKind::bit_depth:
      return bit_depth_reduce(img, t.bits);
    case TransformKind::halftone:
      return floyd_steinberg(img).image;
  }
  throw ConfigError("apply: unknown transform kind");
}

}  // namespace hts
