#include "drf/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace drf {

std::string_view modality_key(Modality m) {
  switch (m) {
    case Modality::T1WI: return "t1wi";
    case Modality::T1CE: return "t1ce";
    case Modality::T2WI: return "t2wi";
    case Modality::FLAIR: return "flair";
  }
  return "unknown";
}

std::string_view modality_label(Modality m) {
  switch (m) {
    case Modality::T1WI: return "T1-WI";
    case Modality::T1CE: return "T1-CE";
    case Modality::T2WI: return "T2-WI";
    case Modality::FLAIR: return "FLAIR";
  }
  return "unknown";
}

std::optional<Modality> parse_modality(std::string_view key) {
  for (Modality m : kAllModalities) {
    if (key == modality_key(m) || key == modality_label(m)) return m;
  }
  return std::nullopt;
}

std::size_t RoiMask::foreground_count() const {
  return static_cast<std::size_t>(
      std::count_if(grid.data().begin(), grid.data().end(), [](std::uint8_t v) { return v != 0; }));
}

void check_aligned(const Volume& v, const RoiMask& m) {
  if (!(v.dims() == m.dims()))
    throw DimensionMismatch("mask dims " + to_string(m.dims()) + " do not match volume dims " +
                            to_string(v.dims()));
}

namespace detail {

namespace {
// Clamped linear-interpolation stencil along one axis.
struct AxisStencil {
  std::size_t i0, i1;
  double w1;
};

AxisStencil axis_stencil(double f, std::size_t n) {
  const double hi = static_cast<double>(n - 1);
  f = std::clamp(f, 0.0, hi);
  auto i0 = static_cast<std::size_t>(std::floor(f));
  if (i0 >= n - 1) return {n - 1, n - 1, 0.0};
  return {i0, i0 + 1, f - static_cast<double>(i0)};
}

std::size_t nearest_index(double f, std::size_t n) {
  const double r = std::floor(f + 0.5);
  if (r <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(r), n - 1);
}
}  // namespace

double sample_trilinear(const Grid3<double>& g, double fx, double fy, double fz) {
  const auto& d = g.dims();
  const AxisStencil ax = axis_stencil(fx, d.nx);
  const AxisStencil ay = axis_stencil(fy, d.ny);
  const AxisStencil az = axis_stencil(fz, d.nz);
  auto lerp_x = [&](std::size_t y, std::size_t z) {
    const double a = g(ax.i0, y, z);
    return ax.w1 == 0.0 ? a : a + ax.w1 * (g(ax.i1, y, z) - a);
  };
  auto lerp_xy = [&](std::size_t z) {
    const double a = lerp_x(ay.i0, z);
    return ay.w1 == 0.0 ? a : a + ay.w1 * (lerp_x(ay.i1, z) - a);
  };
  const double a = lerp_xy(az.i0);
  return az.w1 == 0.0 ? a : a + az.w1 * (lerp_xy(az.i1) - a);
}

std::uint8_t sample_nearest(const Grid3<std::uint8_t>& g, double fx, double fy, double fz) {
  const auto& d = g.dims();
  return g(nearest_index(fx, d.nx), nearest_index(fy, d.ny), nearest_index(fz, d.nz));
}

}  // namespace detail

std::pair<Volume, RoiMask> resample_isotropic(const Volume& v, const RoiMask& m, double target_mm) {
  check_aligned(v, m);
  if (!(target_mm > 0.0)) throw Error("resample target spacing must be > 0");

  const Dims in = v.dims();
  auto out_extent = [&](std::size_t n, double s) {
    const double r = std::round(static_cast<double>(n) * s / target_mm);
    return std::max<std::size_t>(1, static_cast<std::size_t>(r));
  };
  const Dims out{out_extent(in.nx, v.spacing.sx), out_extent(in.ny, v.spacing.sy),
                 out_extent(in.nz, v.spacing.sz)};

  Volume rv{Grid3<double>(out), Spacing{target_mm, target_mm, target_mm}, v.modality};
  RoiMask rm{Grid3<std::uint8_t>(out)};

  std::vector<double> fx(out.nx), fy(out.ny), fz(out.nz);
  for (std::size_t i = 0; i < out.nx; ++i) fx[i] = detail::source_coordinate(i, target_mm, v.spacing.sx);
  for (std::size_t i = 0; i < out.ny; ++i) fy[i] = detail::source_coordinate(i, target_mm, v.spacing.sy);
  for (std::size_t i = 0; i < out.nz; ++i) fz[i] = detail::source_coordinate(i, target_mm, v.spacing.sz);

  for (std::size_t z = 0; z < out.nz; ++z)
    for (std::size_t y = 0; y < out.ny; ++y)
      for (std::size_t x = 0; x < out.nx; ++x) {
        rv.grid(x, y, z) = detail::sample_trilinear(v.grid, fx[x], fy[y], fz[z]);
        rm.grid(x, y, z) = detail::sample_nearest(m.grid, fx[x], fy[y], fz[z]) ? 1 : 0;
      }
  return {std::move(rv), std::move(rm)};
}

Volume normalize_unit(const Volume& v) {
  const auto& data = v.grid.data();
  if (data.empty()) throw DegenerateVolume("cannot normalise an empty volume");
  const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw DegenerateVolume("volume is constant; intensity range is zero");

  Volume out = v;
  const double range = hi - lo;
  for (double& x : out.grid.data()) x = (x - lo) / range;
  return out;
}

QuantizedRoi quantize(const Grid3<double>& values, const RoiMask& m, int levels) {
  if (!(values.dims() == m.dims()))
    throw DimensionMismatch("mask dims " + to_string(m.dims()) + " do not match value grid " +
                            to_string(values.dims()));
  if (levels < 2) throw Error("quantization needs at least 2 levels");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  bool any = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!m.grid[i]) continue;
    any = true;
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  if (!any) throw EmptyRoi("mask has no foreground voxels");

  QuantizedRoi q{Grid3<int>(values.dims(), 0), levels};
  const double range = hi - lo;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!m.grid[i]) continue;
    if (!(range > 0.0)) {
      q.grid[i] = 1;
      continue;
    }
    const double bin = std::floor(static_cast<double>(levels) * (values[i] - lo) / range);
    q.grid[i] = std::min(levels, 1 + static_cast<int>(bin));
  }
  return q;
}

}  // namespace drf
