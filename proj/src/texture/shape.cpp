#include <algorithm>
#include <cmath>
#include <set>

#include "drf/texture.hpp"

namespace drf::texture {

namespace {

constexpr std::array<std::array<int, 3>, 6> kFaces = {{
    {1, 0, 0},
    {-1, 0, 0},
    {0, 1, 0},
    {0, -1, 0},
    {0, 0, 1},
    {0, 0, -1},
}};

constexpr std::array<int, 5> kBoxSizes = {1, 2, 4, 8, 16};

bool fg(const RoiMask& m, long x, long y, long z) { return m.grid.get_or(x, y, z, 0) != 0; }

}  // namespace

RoiMask fill_holes(const RoiMask& m) {
  const auto& d = m.dims();
  // Flood the background from a one-voxel border around the grid.
  const Dims pd{d.nx + 2, d.ny + 2, d.nz + 2};
  Grid3<std::uint8_t> outside(pd, 0);
  std::vector<std::size_t> stack{0};
  outside[0] = 1;
  auto is_bg = [&](long x, long y, long z) { return !fg(m, x - 1, y - 1, z - 1); };
  while (!stack.empty()) {
    const std::size_t idx = stack.back();
    stack.pop_back();
    const long x = static_cast<long>(idx % pd.nx);
    const long y = static_cast<long>((idx / pd.nx) % pd.ny);
    const long z = static_cast<long>(idx / (pd.nx * pd.ny));
    for (const auto& f : kFaces) {
      const long nx = x + f[0], ny = y + f[1], nz = z + f[2];
      if (nx < 0 || ny < 0 || nz < 0 || nx >= static_cast<long>(pd.nx) || ny >= static_cast<long>(pd.ny) ||
          nz >= static_cast<long>(pd.nz))
        continue;
      const std::size_t nidx =
          outside.index(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny), static_cast<std::size_t>(nz));
      if (outside[nidx] || !is_bg(nx, ny, nz)) continue;
      outside[nidx] = 1;
      stack.push_back(nidx);
    }
  }
  RoiMask filled{Grid3<std::uint8_t>(d, 0)};
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) filled.grid(x, y, z) = outside(x + 1, y + 1, z + 1) ? 0 : 1;
  return filled;
}

ShapeFeatures shape_features(const RoiMask& m, const Spacing& sp) {
  const std::size_t count = m.foreground_count();
  if (count == 0) throw EmptyRoi("mask has no foreground voxels");
  const auto& d = m.dims();

  const double volume = static_cast<double>(count) * sp.voxel_volume();
  const double face_area[3] = {sp.sy * sp.sz, sp.sx * sp.sz, sp.sx * sp.sy};

  double surface = 0.0;
  std::vector<std::array<long, 3>> surface_voxels;
  long lo[3] = {static_cast<long>(d.nx), static_cast<long>(d.ny), static_cast<long>(d.nz)};
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        if (!m.grid(x, y, z)) continue;
        const long c[3] = {static_cast<long>(x), static_cast<long>(y), static_cast<long>(z)};
        for (int a = 0; a < 3; ++a) lo[a] = std::min(lo[a], c[a]);
        bool exposed = false;
        for (std::size_t f = 0; f < kFaces.size(); ++f) {
          if (fg(m, c[0] + kFaces[f][0], c[1] + kFaces[f][1], c[2] + kFaces[f][2])) continue;
          surface += face_area[f / 2];
          exposed = true;
        }
        if (exposed) surface_voxels.push_back({c[0], c[1], c[2]});
      }

  const double filled = static_cast<double>(fill_holes(m).foreground_count());
  const double porosity = 1.0 - static_cast<double>(count) / filled;

  // Box counting on the surface voxels, boxes anchored at the mask's bounding-box corner.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int b : kBoxSizes) {
    std::set<std::array<long, 3>> boxes;
    for (const auto& v : surface_voxels) boxes.insert({(v[0] - lo[0]) / b, (v[1] - lo[1]) / b, (v[2] - lo[2]) / b});
    const double xv = std::log(1.0 / b);
    const double yv = std::log(static_cast<double>(boxes.size()));
    sx += xv;
    sy += yv;
    sxx += xv * xv;
    sxy += xv * yv;
  }
  const double k = static_cast<double>(kBoxSizes.size());
  const double fractal = (k * sxy - sx * sy) / (k * sxx - sx * sx);

  return {porosity, fractal, surface, volume};
}

}  // namespace drf::texture
