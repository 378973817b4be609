#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drf/volume.hpp"

namespace drf::texture {

inline constexpr std::size_t kHistogramCount = 6;
inline constexpr std::size_t kGlcmCount = 17;
inline constexpr std::size_t kNgtdmCount = 5;
inline constexpr std::size_t kGlszmCount = 13;
inline constexpr std::size_t kQuantifierCount = kHistogramCount + kGlcmCount + kNgtdmCount + kGlszmCount;
inline constexpr std::size_t kShapeCount = 4;

/// Guard used for NGTDM divisions and the coarseness cap (1 / kEpsilon).
inline constexpr double kEpsilon = 1e-12;

enum class Group { Histogram, Glcm, Ngtdm, Glszm, Shape };
std::string_view group_name(Group g);

struct FeatureName {
  std::string_view name;
  Group group;
};

/// The 41 quantifiers in canonical order: histogram, GLCM, NGTDM, GLSZM.
std::span<const FeatureName, kQuantifierCount> quantifier_names();
/// Porosity, fractal dimension, surface area, volume.
std::span<const FeatureName, kShapeCount> shape_names();

inline constexpr std::string_view kFeatureManifestVersion = "drf-quantifiers/1";
/// Tab-separated "index, group, name" lines preceded by a version comment.
std::string feature_manifest_text();

using HistogramFeatures = std::array<double, kHistogramCount>;
using GlcmFeatures = std::array<double, kGlcmCount>;
using NgtdmFeatures = std::array<double, kNgtdmCount>;
using GlszmFeatures = std::array<double, kGlszmCount>;
using QuantifierVector = std::array<double, kQuantifierCount>;
using ShapeFeatures = std::array<double, kShapeCount>;

/// Mean, variance, skewness, kurtosis, energy, entropy of the in-mask gray-level distribution.
HistogramFeatures histogram_features(const QuantizedRoi& q);

/// Symmetric, direction-merged co-occurrence probabilities. Levels are 1-based.
struct Glcm {
  int levels = 0;
  std::vector<double> p;  // row-major levels x levels
  std::size_t pair_count = 0;

  double operator()(int i, int j) const {
    return p[static_cast<std::size_t>(i - 1) * static_cast<std::size_t>(levels) + static_cast<std::size_t>(j - 1)];
  }
};

/// The 13 unique distance-1 offsets of a 26-neighbourhood.
std::span<const std::array<int, 3>, 13> glcm_directions();

Glcm compute_glcm(const QuantizedRoi& q);
/// All probability mass on (level, level).
Glcm diagonal_glcm(int levels, int level);
GlcmFeatures glcm_features(const Glcm& g);

struct Ngtdm {
  int levels = 0;
  std::vector<double> s;  // index level-1
  std::vector<double> n;
  std::vector<double> p;
  double valid_voxels = 0.0;
};

Ngtdm compute_ngtdm(const QuantizedRoi& q);
/// Coarseness, contrast, busyness, complexity, strength.
NgtdmFeatures ngtdm_features(const Ngtdm& n);

struct Glszm {
  struct Entry {
    int level;
    std::size_t size;
    std::size_t count;
  };
  int levels = 0;
  std::size_t max_zone_size = 0;
  /// Nonzero cells sorted by (level, size).
  std::vector<Entry> entries;

  std::size_t at(int level, std::size_t size) const;
  std::size_t zone_count() const;
};

/// Zones are 26-connected components of equal gray level inside the mask.
Glszm compute_glszm(const QuantizedRoi& q);
GlszmFeatures glszm_features(const Glszm& z, std::size_t n_mask_voxels);

ShapeFeatures shape_features(const RoiMask& m, const Spacing& spacing);

/// Background voxels unreachable from the grid border (6-connectivity) become foreground.
RoiMask fill_holes(const RoiMask& m);

/// All 41 quantifiers. Degenerate GLCM/NGTDM inputs fall back to constant-region values.
QuantifierVector compute_quantifiers(const QuantizedRoi& q);

}  // namespace drf::texture
