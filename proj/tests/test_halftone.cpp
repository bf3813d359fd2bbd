#include <cmath>
#include <random>

#include "doctest.h"
#include "halftone_oracle.hpp"
#include "hts/halftone.hpp"

using namespace hts;

namespace {

Image random_image(int h, int w, int c, uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Image img(h, w, c);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : img.data) v = dist(rng);
  return img;
}

}  // namespace

TEST_CASE("quantize thresholds strictly above 0.5") {
  CHECK(quantize(0.0) == 0.0);
  CHECK(quantize(0.5) == 0.0);  // tie goes to 0
  CHECK(quantize(0.5 + 1e-12) == 1.0);
  CHECK(quantize(1.0) == 1.0);
  CHECK(quantize(-0.3) == 0.0);
  CHECK(quantize(1.7) == 1.0);
}

TEST_CASE("worked example: 1x1 [0.7]") {
  Image img(1, 1, 1);
  img.at(0, 0, 0) = 0.7;
  auto r = floyd_steinberg(img);
  CHECK(r.image.at(0, 0, 0) == 1.0);
  CHECK(r.dropped_error == doctest::Approx(-0.3).epsilon(1e-12));
}

TEST_CASE("worked example: 1x2 [0.6, 0.2]") {
  Image img(1, 2, 1);
  img.at(0, 0, 0) = 0.6;
  img.at(0, 0, 1) = 0.2;
  auto r = floyd_steinberg(img);
  // 0.6 -> 1, error -0.4; right neighbor gets -0.4*7/16 = -0.175, so the
  // second pixel sees 0.025 -> 0. Dropped: the 9/16 of -0.4 from pixel 0
  // plus all of 0.025 from pixel 1.
  CHECK(r.image.at(0, 0, 0) == 1.0);
  CHECK(r.image.at(0, 0, 1) == 0.0);
  CHECK(r.dropped_error == doctest::Approx(img.sum() - r.image.sum()).epsilon(1e-12));
  CHECK(r.dropped_error == doctest::Approx(-0.4 * 9.0 / 16.0 + 0.025).epsilon(1e-9));
}

TEST_CASE("worked example: 2x2 constant 0.5 gives the checker pattern") {
  Image img(2, 2, 1, 0.5);
  auto r = floyd_steinberg(img);
  CHECK(r.image.at(0, 0, 0) == 0.0);
  CHECK(r.image.at(0, 0, 1) == 1.0);
  CHECK(r.image.at(0, 1, 0) == 1.0);
  CHECK(r.image.at(0, 1, 1) == 0.0);
}

TEST_CASE("floyd_steinberg matches the straight-line oracle bit-exactly") {
  std::mt19937_64 meta(42);
  for (int trial = 0; trial < 40; ++trial) {
    int h = 1 + static_cast<int>(meta() % 12);
    int w = 1 + static_cast<int>(meta() % 12);
    int c = (meta() % 2) ? 3 : 1;
    Image img = random_image(h, w, c, meta());
    auto lib = floyd_steinberg(img);
    auto ref = reference_floyd_steinberg(img);
    CHECK(lib.image.data == ref.image.data);
    CHECK(lib.dropped_error == doctest::Approx(ref.dropped_error).epsilon(1e-12));
  }
}

TEST_CASE("error conservation: sum(in) - sum(out) == dropped_error") {
  std::mt19937_64 meta(7);
  for (int trial = 0; trial < 20; ++trial) {
    int h = 1 + static_cast<int>(meta() % 40);
    int w = 1 + static_cast<int>(meta() % 40);
    Image img = random_image(h, w, 3, meta());
    auto r = floyd_steinberg(img);
    double tol = 1e-9 * h * w;
    CHECK(std::abs(img.sum() - r.image.sum() - r.dropped_error) <= tol);
  }
}

TEST_CASE("output is binary per channel") {
  Image img = random_image(17, 23, 3, 99);
  auto r = floyd_steinberg(img);
  for (double v : r.image.data) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("causality: pixels are decided before later-raster perturbations") {
  // Changing a pixel must not alter any output pixel strictly earlier in
  // raster order.
  std::mt19937_64 meta(1234);
  for (int trial = 0; trial < 30; ++trial) {
    Image img = random_image(8, 8, 1, meta());
    auto base = floyd_steinberg(img);
    int pr = static_cast<int>(meta() % 8), pc = static_cast<int>(meta() % 8);
    Image perturbed = img;
    perturbed.at(0, pr, pc) = std::min(1.0, perturbed.at(0, pr, pc) + 0.37);
    auto mod = floyd_steinberg(perturbed);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) {
        if (r < pr || (r == pr && c < pc)) CHECK(base.image.at(0, r, c) == mod.image.at(0, r, c));
      }
  }
}

TEST_CASE("binary inputs are fixed points (all 3x3 patterns, first row)") {
  // Enumerate all 2^9 binary 3x3 images; each is already binary so diffusion
  // produces no error and the output equals the input.
  for (int bits = 0; bits < 512; ++bits) {
    Image img(3, 3, 1);
    for (int i = 0; i < 9; ++i) img.data[static_cast<size_t>(i)] = (bits >> i) & 1 ? 1.0 : 0.0;
    auto r = floyd_steinberg(img);
    CHECK(r.image.data == img.data);
    CHECK(r.dropped_error == 0.0);
  }
}

TEST_CASE("channels diffuse independently") {
  Image a = random_image(9, 11, 1, 5);
  Image b = random_image(9, 11, 1, 6);
  Image both(9, 11, 3);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 11; ++c) {
      both.at(0, r, c) = a.at(0, r, c);
      both.at(1, r, c) = b.at(0, r, c);
      both.at(2, r, c) = a.at(0, r, c);
    }
  auto ra = floyd_steinberg(a);
  auto rb = floyd_steinberg(b);
  auto rboth = floyd_steinberg(both);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 11; ++c) {
      CHECK(rboth.image.at(0, r, c) == ra.image.at(0, r, c));
      CHECK(rboth.image.at(1, r, c) == rb.image.at(0, r, c));
      CHECK(rboth.image.at(2, r, c) == ra.image.at(0, r, c));
    }
  CHECK(rboth.dropped_error ==
        doctest::Approx(2 * ra.dropped_error + rb.dropped_error).epsilon(1e-12));
}

TEST_CASE("input image is never mutated") {
  Image img = random_image(6, 6, 3, 77);
  Image copy = img;
  (void)floyd_steinberg(img);
  CHECK(img.data == copy.data);
}

TEST_CASE("custom filter: push-all-right stencil") {
  // Stencil that pushes the entire error one pixel right. On a single row,
  // this is one-dimensional error diffusion.
  ErrorFilter f;
  f.rows = 1;
  f.cols = 2;
  f.anchor_row = 0;
  f.anchor_col = 0;
  f.weights = {0.0, 1.0};
  f.validate();

  Image img(1, 4, 1);
  img.at(0, 0, 0) = 0.6;
  img.at(0, 0, 1) = 0.6;
  img.at(0, 0, 2) = 0.6;
  img.at(0, 0, 3) = 0.6;
  auto r = error_diffuse(img, f);
  // 0.6->1 (carry -0.4); 0.2->0 (carry 0.2); 0.8->1 (carry -0.2); 0.4->0
  // (carry 0.4 dropped).
  CHECK(r.image.at(0, 0, 0) == 1.0);
  CHECK(r.image.at(0, 0, 1) == 0.0);
  CHECK(r.image.at(0, 0, 2) == 1.0);
  CHECK(r.image.at(0, 0, 3) == 0.0);
  CHECK(r.dropped_error == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("filter validation rejects non-causal stencils") {
  ErrorFilter bad;
  bad.rows = 1;
  bad.cols = 3;
  bad.anchor_row = 0;
  bad.anchor_col = 1;
  bad.weights = {0.5, 0.0, 0.5};  // weight strictly left of the anchor
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  ErrorFilter self;
  self.rows = 1;
  self.cols = 2;
  self.anchor_row = 0;
  self.anchor_col = 0;
  self.weights = {1.0, 0.0};  // weight on the anchor itself
  CHECK_THROWS_AS(self.validate(), ConfigError);

  ErrorFilter above;
  above.rows = 2;
  above.cols = 1;
  above.anchor_row = 1;
  above.anchor_col = 0;
  above.weights = {1.0, 0.0};  // weight on the row above the anchor
  CHECK_THROWS_AS(above.validate(), ConfigError);

  ErrorFilter wrong_size;
  wrong_size.rows = 2;
  wrong_size.cols = 3;
  wrong_size.anchor_row = 0;
  wrong_size.anchor_col = 1;
  wrong_size.weights = {0.0, 0.0, 1.0};  // 3 weights for a 2x3 stencil
  CHECK_THROWS_AS(wrong_size.validate(), ConfigError);
}

TEST_CASE("floyd_steinberg_filter is the (7,3,5,1)/16 stencil") {
  const auto& f = floyd_steinberg_filter();
  CHECK(f.rows == 2);
  CHECK(f.cols == 3);
  CHECK(f.anchor_row == 0);
  CHECK(f.anchor_col == 1);
  CHECK(f.weight(0, 2) == doctest::Approx(7.0 / 16.0));
  CHECK(f.weight(1, 0) == doctest::Approx(3.0 / 16.0));
  CHECK(f.weight(1, 1) == doctest::Approx(5.0 / 16.0));
  CHECK(f.weight(1, 2) == doctest::Approx(1.0 / 16.0));
  CHECK_NOTHROW(f.validate());
}
