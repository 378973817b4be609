#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "drf/grid.hpp"

namespace drf {

enum class Modality { T1WI, T1CE, T2WI, FLAIR };

inline constexpr std::array<Modality, 4> kAllModalities = {Modality::T1WI, Modality::T1CE,
                                                           Modality::T2WI, Modality::FLAIR};

/// Short lowercase key used in manifests and flags ("t1wi", "t1ce", "t2wi", "flair").
std::string_view modality_key(Modality m);
/// Display prefix used in feature names ("T1-WI", "T1-CE", "T2-WI", "FLAIR").
std::string_view modality_label(Modality m);
std::optional<Modality> parse_modality(std::string_view key);

/// Scalar 3D image with physical voxel spacing in mm.
struct Volume {
  Grid3<double> grid;
  Spacing spacing;
  Modality modality = Modality::T1WI;

  const Dims& dims() const { return grid.dims(); }
};

/// Binary ROI aligned voxel-for-voxel with a companion Volume.
struct RoiMask {
  Grid3<std::uint8_t> grid;

  const Dims& dims() const { return grid.dims(); }
  std::size_t foreground_count() const;
  bool empty() const { return foreground_count() == 0; }
};

/// Gray levels inside a mask: 0 outside, 1..levels inside.
struct QuantizedRoi {
  Grid3<int> grid;
  int levels = 32;

  const Dims& dims() const { return grid.dims(); }
  bool in_mask(std::size_t i) const { return grid[i] > 0; }
};

inline constexpr int kDefaultLevels = 32;

enum class VolumeFormat { Auto, Nifti, RawJson };

/// Loads a NIfTI-1 (.nii / .nii.gz) or raw+JSON-sidecar volume.
/// Raw files look for "<path>.json" first, then the path with its extension replaced by ".json".
Volume load_volume(const std::filesystem::path& path, VolumeFormat format = VolumeFormat::Auto);

/// Loads a mask with the same readers; any nonzero voxel is foreground.
RoiMask load_mask(const std::filesystem::path& path, VolumeFormat format = VolumeFormat::Auto);

enum class NiftiDtype : std::int16_t { UInt8 = 2, Int16 = 4, Float32 = 16 };

/// Writes a single-file NIfTI-1 volume, gzip-compressed when the name ends in ".gz".
void save_nifti(const std::filesystem::path& path, const Grid3<double>& grid, const Spacing& spacing,
                NiftiDtype dtype = NiftiDtype::Float32);

/// Writes `<stem>.raw` plus `<stem>.json`.
void save_raw(const std::filesystem::path& raw_path, const Grid3<double>& grid,
              const Spacing& spacing, NiftiDtype dtype = NiftiDtype::Float32);

void check_aligned(const Volume& v, const RoiMask& m);

/// Trilinear resample of the volume and nearest-neighbour resample of the mask onto an
/// isotropic grid. Voxel centres are aligned: output index j sits at physical (j + 0.5) * target.
std::pair<Volume, RoiMask> resample_isotropic(const Volume& v, const RoiMask& m, double target_mm);

/// (v - min) / (max - min). Throws DegenerateVolume when the volume is constant.
Volume normalize_unit(const Volume& v);

/// Uniform binning over the in-mask intensity range.
QuantizedRoi quantize(const Grid3<double>& values, const RoiMask& m, int levels = kDefaultLevels);
inline QuantizedRoi quantize(const Volume& v, const RoiMask& m, int levels = kDefaultLevels) {
  return quantize(v.grid, m, levels);
}

namespace detail {
double sample_trilinear(const Grid3<double>& g, double fx, double fy, double fz);
std::uint8_t sample_nearest(const Grid3<std::uint8_t>& g, double fx, double fy, double fz);
/// Maps output index j to a continuous input index for a centre-aligned rescale.
inline double source_coordinate(std::size_t j, double out_step, double in_step) {
  return (static_cast<double>(j) + 0.5) * out_step / in_step - 0.5;
}
}  // namespace detail

}  // namespace drf
