#include "hts/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hts {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t mix_seed(uint64_t a, uint64_t b) { return splitmix64(splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ULL)); }

uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) { return mix_seed(mix_seed(a, b), c); }

namespace {

constexpr int kSize = 32;

// Per-class pseudo-random sign pattern added at small amplitude: a highly
// predictive but non-robust feature, so standard-trained models are accurate
// on clean data yet break inside an 8/255 ball, while the high-contrast
// shape remains available for adversarially trained models.
const std::vector<double>& class_signature(int cls) {
  static const auto all = [] {
    std::vector<std::vector<double>> sigs(10);
    for (int k = 0; k < 10; ++k) {
      std::mt19937_64 rng(0xabcd0000ull + static_cast<uint64_t>(k));
      sigs[k].resize(3 * kSize * kSize);
      for (double& v : sigs[k]) v = (rng() & 1) ? 1.0 : -1.0;
    }
    return sigs;
  }();
  return all[static_cast<size_t>(cls)];
}

constexpr double kSignatureAmp = 8.0 / 255.0;

// Shape mask in [0,1] for one class, parameterized by the per-example RNG.
double pattern_value(int cls, int r, int c, int period, int phase, int phase2, double cx,
                     double cy, double radius, double thickness) {
  auto stripe = [&](int coord) { return ((coord + phase) / period) % 2 == 0 ? 1.0 : 0.0; };
  double dx = c - cx, dy = r - cy;
  double d = std::sqrt(dx * dx + dy * dy);
  switch (cls) {
    case 0:  // horizontal stripes
      return stripe(r);
    case 1:  // vertical stripes
      return stripe(c);
    case 2:  // diagonal stripes
      return ((r + c + phase) / period) % 2 == 0 ? 1.0 : 0.0;
    case 3:  // checkerboard
      return (((r + phase) / period) + ((c + phase2) / period)) % 2 == 0 ? 1.0 : 0.0;
    case 4:  // filled disk
      return d < radius ? 1.0 : 0.0;
    case 5:  // ring
      return std::abs(d - radius) < thickness ? 1.0 : 0.0;
    case 6:  // axis-aligned cross
      return (std::abs(dy) < thickness || std::abs(dx) < thickness) ? 1.0 : 0.0;
    case 7:  // radial gradient blob
      return std::clamp(1.0 - d / (radius + 6.0), 0.0, 1.0);
    case 8:  // linear ramp along a random diagonal
      return std::clamp((dx + (phase2 % 2 ? dy : -dy)) / 32.0 + 0.5, 0.0, 1.0);
    case 9:  // diagonal cross (X shape)
      return (std::abs(dy - dx) < thickness || std::abs(dy + dx) < thickness) ? 1.0 : 0.0;
    default:
      return 0.0;
  }
}

}  // namespace

std::vector<LabeledExample> make_synthetic_dataset(size_t count, uint64_t seed, int num_classes) {
  if (num_classes < 1 || num_classes > 10) throw ConfigError("synthetic dataset: 1..10 classes");
  std::vector<LabeledExample> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    int cls = static_cast<int>(i % num_classes);
    std::mt19937_64 rng(mix_seed(seed, i));
    std::uniform_int_distribution<int> period_dist(4, 8);
    std::uniform_int_distribution<int> phase_dist(0, 31);
    std::uniform_real_distribution<double> center_dist(13.0, 19.0);
    std::uniform_real_distribution<double> radius_dist(7.0, 11.0);
    std::uniform_real_distribution<double> thick_dist(1.8, 3.2);
    std::uniform_real_distribution<double> bg_dist(0.20, 0.40);
    std::uniform_real_distribution<double> amp_dist(0.10, 0.18);
    std::uniform_real_distribution<double> noise_dist(-0.03, 0.03);

    int period = period_dist(rng);
    int phase = phase_dist(rng);
    int phase2 = phase_dist(rng);
    double cx = center_dist(rng), cy = center_dist(rng);
    double radius = radius_dist(rng);
    double thickness = thick_dist(rng);
    double bg[3], fg[3];
    for (int c = 0; c < 3; ++c) bg[c] = bg_dist(rng);
    for (int c = 0; c < 3; ++c) fg[c] = bg[c] + amp_dist(rng);

    // Faint pattern of a wrong class overlaid on every image. A small-budget
    // attacker can amplify it toward the decision boundary; clean margins
    // stay comfortable.
    std::uniform_real_distribution<double> ghost_amp_dist(0.04, 0.07);
    int ghost_cls = (cls + 1 + static_cast<int>(rng() % 9)) % 10;
    int g_period = period_dist(rng);
    int g_phase = phase_dist(rng);
    int g_phase2 = phase_dist(rng);
    double g_cx = center_dist(rng), g_cy = center_dist(rng);
    double g_radius = radius_dist(rng);
    double g_thickness = thick_dist(rng);
    double ghost_amp = ghost_amp_dist(rng);

    LabeledExample ex;
    ex.label = cls;
    ex.image = Image(kSize, kSize, 3);
    const auto& sig = class_signature(cls);
    for (int r = 0; r < kSize; ++r)
      for (int col = 0; col < kSize; ++col) {
        double m = pattern_value(cls, r, col, period, phase, phase2, cx, cy, radius, thickness);
        double gm = pattern_value(ghost_cls, r, col, g_period, g_phase, g_phase2, g_cx, g_cy,
                                  g_radius, g_thickness);
        for (int c = 0; c < 3; ++c) {
          double v = bg[c] + (fg[c] - bg[c]) * m + ghost_amp * gm + noise_dist(rng) +
                     kSignatureAmp * sig[(static_cast<size_t>(c) * kSize + r) * kSize + col];
          ex.image.at(c, r, col) = std::clamp(v, 0.0, 1.0);
        }
      }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace hts
