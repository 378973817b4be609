#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "drf/volume.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace drf;

namespace {

// Minimal little-endian NIfTI-1 writer, independent of the library's own writer.
void write_nifti_int16(const fs::path& path, const std::vector<std::int16_t>& voxels, int nx, int ny, int nz,
                       float slope, float inter) {
  std::vector<unsigned char> hdr(352, 0);
  auto put = [&](std::size_t off, const auto& v) { std::memcpy(hdr.data() + off, &v, sizeof(v)); };
  put(0, std::int32_t{348});
  const std::int16_t dim[8] = {3, static_cast<std::int16_t>(nx), static_cast<std::int16_t>(ny),
                               static_cast<std::int16_t>(nz), 1, 1, 1, 1};
  std::memcpy(hdr.data() + 40, dim, sizeof(dim));
  put(70, std::int16_t{4});   // datatype int16
  put(72, std::int16_t{16});  // bitpix
  const float pixdim[8] = {1.0f, 0.5f, 0.75f, 2.0f, 1.0f, 1.0f, 1.0f, 1.0f};
  std::memcpy(hdr.data() + 76, pixdim, sizeof(pixdim));
  put(108, 352.0f);  // vox_offset
  put(112, slope);
  put(116, inter);
  std::memcpy(hdr.data() + 344, "n+1", 4);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(hdr.data()), static_cast<std::streamsize>(hdr.size()));
  out.write(reinterpret_cast<const char*>(voxels.data()), static_cast<std::streamsize>(voxels.size() * 2));
}

void write_raw(const fs::path& path, std::size_t bytes, const std::string& sidecar) {
  std::ofstream(path, std::ios::binary) << std::string(bytes, '\0');
  std::ofstream(path.string() + ".json") << sidecar;
}

Volume make_volume(Dims d, Spacing s, const std::function<double(std::size_t, std::size_t, std::size_t)>& f) {
  Volume v{Grid3<double>(d), s, Modality::T1WI};
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) v.grid(x, y, z) = f(x, y, z);
  return v;
}

RoiMask full_mask(Dims d) { return RoiMask{Grid3<std::uint8_t>(d, 1)}; }

}  // namespace

TEST(LoadVolume, RawZeroVolume) {
  drf::testing::TempDir tmp;
  const auto p = tmp.path() / "zeros.raw";
  write_raw(p, 64 * 4, R"({"dims":[4,4,4],"spacing":[1,1,1],"dtype":"f32","order":"x-fastest"})");
  const Volume v = load_volume(p);
  EXPECT_EQ(v.dims(), (Dims{4, 4, 4}));
  EXPECT_EQ(v.spacing, (Spacing{1, 1, 1}));
  ASSERT_EQ(v.grid.size(), 64u);
  for (double x : v.grid.data()) EXPECT_EQ(x, 0.0);
}

TEST(LoadVolume, NiftiScaleSlopeApplied) {
  drf::testing::TempDir tmp;
  const auto p = tmp.path() / "scaled.nii";
  write_nifti_int16(p, std::vector<std::int16_t>(2 * 3 * 4, 3), 2, 3, 4, 2.0f, 0.0f);
  const Volume v = load_volume(p);
  EXPECT_EQ(v.dims(), (Dims{2, 3, 4}));
  EXPECT_EQ(v.spacing, (Spacing{0.5, 0.75, 2.0}));
  for (double x : v.grid.data()) EXPECT_EQ(x, 6.0);
}

TEST(LoadVolume, NiftiZeroSlopeMeansUnscaled) {
  drf::testing::TempDir tmp;
  const auto p = tmp.path() / "unscaled.nii";
  write_nifti_int16(p, {-7, 0, 9, 12}, 4, 1, 1, 0.0f, 100.0f);
  const Volume v = load_volume(p);
  EXPECT_EQ(v.grid.data(), (std::vector<double>{-7, 0, 9, 12}));
}

TEST(LoadVolume, RawSizeMismatchIsCorrupt) {
  drf::testing::TempDir tmp;
  const auto p = tmp.path() / "short.raw";
  write_raw(p, 100, R"({"dims":[4,4,4],"spacing":[1,1,1],"dtype":"u8"})");
  EXPECT_THROW(load_volume(p), CorruptFile);
}

TEST(LoadVolume, UnsupportedDtypeIsFormatError) {
  drf::testing::TempDir tmp;
  const auto p = tmp.path() / "f64.raw";
  write_raw(p, 64 * 8, R"({"dims":[4,4,4],"spacing":[1,1,1],"dtype":"f64"})");
  EXPECT_THROW(load_volume(p), FormatError);
}

TEST(LoadVolume, LibraryWriterRoundTripsThroughGzip) {
  drf::testing::TempDir tmp;
  const Volume v = make_volume({3, 4, 5}, {1.0, 1.5, 2.0}, [](auto x, auto y, auto z) { return x + 10.0 * y - z; });
  save_nifti(tmp.path() / "v.nii.gz", v.grid, v.spacing);
  const Volume back = load_volume(tmp.path() / "v.nii.gz");
  EXPECT_EQ(back.grid, v.grid);
  EXPECT_EQ(back.spacing, v.spacing);
}

TEST(Resample, IdentityAtNativeSpacing) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-50, 50);
  const Volume v = make_volume({5, 6, 7}, {1, 1, 1}, [&](auto, auto, auto) { return u(rng); });
  const auto [out, mask] = resample_isotropic(v, full_mask(v.dims()), 1.0);
  ASSERT_EQ(out.dims(), v.dims());
  for (std::size_t i = 0; i < v.grid.size(); ++i) EXPECT_NEAR(out.grid[i], v.grid[i], 1e-6);
  EXPECT_EQ(mask.foreground_count(), v.grid.size());
}

TEST(Resample, ConstantVolumeStaysConstant) {
  const Volume v = make_volume({8, 8, 4}, {0.5, 0.5, 2.0}, [](auto, auto, auto) { return 7.25; });
  const auto [out, mask] = resample_isotropic(v, full_mask(v.dims()), 1.0);
  EXPECT_EQ(out.dims(), (Dims{4, 4, 8}));
  EXPECT_EQ(out.spacing, (Spacing{1, 1, 1}));
  for (double x : out.grid.data()) EXPECT_NEAR(x, 7.25, 1e-12);
}

TEST(Resample, LinearRampMatchesClosedForm) {
  // Input voxel i has its centre at physical x = (i + 0.5) * 2 and stores that coordinate.
  const Volume v = make_volume({8, 3, 3}, {2, 1, 1}, [](auto x, auto, auto) { return (x + 0.5) * 2.0; });
  const auto [out, mask] = resample_isotropic(v, full_mask(v.dims()), 1.0);
  ASSERT_EQ(out.dims().nx, 16u);
  // Interior samples: output centre (j + 0.5) lies between the first and last input centres.
  for (std::size_t j = 1; j + 1 < out.dims().nx; ++j)
    for (std::size_t z = 0; z < out.dims().nz; ++z) EXPECT_NEAR(out.grid(j, 1, z), j + 0.5, 1e-6) << "j=" << j;
}

TEST(Resample, MaskStaysBinary) {
  std::mt19937 rng(9);
  RoiMask m{Grid3<std::uint8_t>({7, 5, 3})};
  for (auto& b : m.grid.data()) b = rng() % 3 == 0 ? 1 : 0;
  const Volume v = make_volume(m.dims(), {0.7, 1.3, 2.1}, [](auto x, auto y, auto z) { return double(x + y + z); });
  const auto [out, mask] = resample_isotropic(v, m, 1.0);
  EXPECT_EQ(mask.dims(), out.dims());
  for (auto b : mask.grid.data()) EXPECT_TRUE(b == 0 || b == 1);
}

TEST(Normalize, AffineExamples) {
  const Volume a = make_volume({3, 1, 1}, {}, [](auto x, auto, auto) { return 5.0 * x; });
  EXPECT_EQ(normalize_unit(a).grid.data(), (std::vector<double>{0, 0.5, 1}));
  const Volume b = make_volume({2, 1, 1}, {}, [](auto x, auto, auto) { return x ? 2.0 : -2.0; });
  EXPECT_EQ(normalize_unit(b).grid.data(), (std::vector<double>{0, 1}));
}

TEST(Normalize, ConstantVolumeIsDegenerate) {
  const Volume c = make_volume({2, 2, 2}, {}, [](auto, auto, auto) { return 4.0; });
  EXPECT_THROW(normalize_unit(c), DegenerateVolume);
}

TEST(Normalize, IdempotentAndInUnitRange) {
  std::mt19937 rng(21);
  std::normal_distribution<double> g(100, 30);
  const Volume v = make_volume({6, 6, 6}, {}, [&](auto, auto, auto) { return g(rng); });
  const Volume once = normalize_unit(v);
  const Volume twice = normalize_unit(once);
  for (std::size_t i = 0; i < once.grid.size(); ++i) {
    EXPECT_GE(once.grid[i], 0.0);
    EXPECT_LE(once.grid[i], 1.0);
    EXPECT_NEAR(twice.grid[i], once.grid[i], 1e-15);
  }
}

TEST(Quantize, TwoValuesTwoLevels) {
  const Grid3<double> g({2, 1, 1}, std::vector<double>{0, 1});
  EXPECT_EQ(quantize(g, full_mask(g.dims()), 2).grid.data(), (std::vector<int>{1, 2}));
}

TEST(Quantize, IntegerRampHitsEveryLevel) {
  std::vector<double> vals(32);
  for (int i = 0; i < 32; ++i) vals[i] = i;
  const Grid3<double> g({32, 1, 1}, vals);
  const auto q = quantize(g, full_mask(g.dims()), 32);
  for (int i = 0; i < 32; ++i) EXPECT_EQ(q.grid[i], i + 1);
}

TEST(Quantize, BinEdgesFromDirectFormula) {
  const std::vector<double> vals{0.0, 0.49, 0.51, 1.0};
  const Grid3<double> g({4, 1, 1}, vals);
  const auto q = quantize(g, full_mask(g.dims()), 2);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const int expected = std::min(2, 1 + static_cast<int>(std::floor(2 * vals[i])));
    EXPECT_EQ(q.grid[i], expected);
  }
  EXPECT_EQ(q.grid.data(), (std::vector<int>{1, 1, 2, 2}));
}

TEST(Quantize, EmptyMaskThrows) {
  const Grid3<double> g({2, 2, 2}, 1.0);
  EXPECT_THROW(quantize(g, RoiMask{Grid3<std::uint8_t>({2, 2, 2}, 0)}), EmptyRoi);
}

TEST(Quantize, OutsideMaskIsZeroAndRangeUsesMaskOnly) {
  const Grid3<double> g({4, 1, 1}, std::vector<double>{-100, 2, 4, 100});
  RoiMask m{Grid3<std::uint8_t>({4, 1, 1}, std::vector<std::uint8_t>{0, 1, 1, 0})};
  const auto q = quantize(g, m, 4);
  EXPECT_EQ(q.grid.data(), (std::vector<int>{0, 1, 4, 0}));
}

TEST(Quantize, MonotoneWithFullRange) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-3, 8);
  std::vector<double> vals(500);
  for (double& v : vals) v = u(rng);
  const Grid3<double> g({500, 1, 1}, vals);
  const auto q = quantize(g, full_mask(g.dims()), 32);
  int lo = 99, hi = 0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    lo = std::min(lo, q.grid[i]);
    hi = std::max(hi, q.grid[i]);
    for (std::size_t j = 0; j < vals.size(); ++j)
      if (vals[i] <= vals[j]) {
        ASSERT_LE(q.grid[i], q.grid[j]);
      }
  }
  EXPECT_EQ(lo, 1);
  EXPECT_EQ(hi, 32);
}
