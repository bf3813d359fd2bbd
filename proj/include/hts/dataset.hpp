#pragma once

#include <cstdint>
#include <vector>

#include "hts/image.hpp"

namespace hts {

// Procedurally generated 32x32x3 dataset of 10 parametric shape/texture
// classes (stripes, checkerboards, disks, rings, crosses, gradients, ...).
// Labels are balanced round-robin; every example is fully determined by
// (seed, index), so splits are reproducible and order-independent.
std::vector<LabeledExample> make_synthetic_dataset(size_t count, uint64_t seed,
                                                   int num_classes = 10);

// splitmix64-style stream mixer used to derive per-example RNG seeds.
uint64_t mix_seed(uint64_t a, uint64_t b);
uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c);

}  // namespace hts
