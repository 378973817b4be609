#pragma once

#include <array>
#include <vector>

#include "drf/volume.hpp"

namespace drf::testing {

// Brute-force quantifiers written from the textbook definitions, sharing no code with the
// library: voxel lists instead of grids, all-pairs neighbour search, union-find zones.
std::array<double, 41> reference_quantifiers(const QuantizedRoi& q);

// Symmetric co-occurrence matrix built by enumerating all 26 offsets (each unordered pair is
// seen from both ends). Row-major, levels x levels, normalized.
std::vector<double> reference_glcm(const QuantizedRoi& q);

// Seeded random quantized volume: `fill` is the probability that a voxel is in the mask.
QuantizedRoi random_quantized(std::size_t side, int levels, double fill, unsigned seed);

}  // namespace drf::testing
