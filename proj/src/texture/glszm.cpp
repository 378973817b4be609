#include <algorithm>
#include <map>

#include "drf/texture.hpp"

namespace drf::texture {

std::size_t Glszm::at(int level, std::size_t size) const {
  const auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{level, size},
                                   [](const Entry& e, const std::pair<int, std::size_t>& key) {
                                     return std::pair{e.level, e.size} < key;
                                   });
  if (it == entries.end() || it->level != level || it->size != size) return 0;
  return it->count;
}

std::size_t Glszm::zone_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.count;
  return n;
}

Glszm compute_glszm(const QuantizedRoi& q) {
  const auto& d = q.dims();
  std::vector<std::uint8_t> visited(q.grid.size(), 0);
  std::map<std::pair<int, std::size_t>, std::size_t> cells;
  std::vector<std::size_t> stack;
  bool any_voxel = false;

  for (std::size_t start = 0; start < q.grid.size(); ++start) {
    const int g = q.grid[start];
    if (g <= 0 || visited[start]) continue;
    any_voxel = true;
    std::size_t size = 0;
    visited[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t idx = stack.back();
      stack.pop_back();
      ++size;
      const long x = static_cast<long>(idx % d.nx);
      const long y = static_cast<long>((idx / d.nx) % d.ny);
      const long z = static_cast<long>(idx / (d.nx * d.ny));
      for (long dz = -1; dz <= 1; ++dz)
        for (long dy = -1; dy <= 1; ++dy)
          for (long dx = -1; dx <= 1; ++dx) {
            const long nx = x + dx, ny = y + dy, nz = z + dz;
            if (nx < 0 || ny < 0 || nz < 0 || nx >= static_cast<long>(d.nx) || ny >= static_cast<long>(d.ny) ||
                nz >= static_cast<long>(d.nz))
              continue;
            const std::size_t nidx = q.grid.index(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny),
                                                  static_cast<std::size_t>(nz));
            if (visited[nidx] || q.grid[nidx] != g) continue;
            visited[nidx] = 1;
            stack.push_back(nidx);
          }
    }
    ++cells[{g, size}];
  }
  if (!any_voxel) throw EmptyRoi("quantized ROI has no in-mask voxels");

  Glszm z;
  z.levels = q.levels;
  for (const auto& [key, count] : cells) {
    z.entries.push_back({key.first, key.second, count});
    z.max_zone_size = std::max(z.max_zone_size, key.second);
  }
  return z;
}

GlszmFeatures glszm_features(const Glszm& z, std::size_t n_mask_voxels) {
  const double nz = static_cast<double>(z.zone_count());
  if (nz == 0.0) throw DegenerateMatrix("GLSZM has no zones");

  std::map<int, double> by_level;
  std::map<std::size_t, double> by_size;
  double sae = 0.0, lae = 0.0, lglze = 0.0, hglze = 0.0, salgle = 0.0, sahgle = 0.0, lalgle = 0.0, lahgle = 0.0;
  double mu_g = 0.0, mu_s = 0.0;
  for (const auto& e : z.entries) {
    const double c = static_cast<double>(e.count);
    const double g = e.level, s = static_cast<double>(e.size);
    const double g2 = g * g, s2 = s * s;
    by_level[e.level] += c;
    by_size[e.size] += c;
    sae += c / s2;
    lae += c * s2;
    lglze += c / g2;
    hglze += c * g2;
    salgle += c / (g2 * s2);
    sahgle += c * g2 / s2;
    lalgle += c * s2 / g2;
    lahgle += c * g2 * s2;
    mu_g += c * g;
    mu_s += c * s;
  }
  mu_g /= nz;
  mu_s /= nz;
  double glv = 0.0, zsv = 0.0;
  for (const auto& e : z.entries) {
    const double pc = static_cast<double>(e.count) / nz;
    glv += pc * (e.level - mu_g) * (e.level - mu_g);
    zsv += pc * (static_cast<double>(e.size) - mu_s) * (static_cast<double>(e.size) - mu_s);
  }
  double gln = 0.0, zsn = 0.0;
  for (const auto& [level, c] : by_level) gln += c * c;
  for (const auto& [size, c] : by_size) zsn += c * c;

  const double zp = n_mask_voxels > 0 ? nz / static_cast<double>(n_mask_voxels) : 0.0;
  return {sae / nz,    lae / nz,    gln / nz,    zsn / nz,    zp,  lglze / nz, hglze / nz,
          salgle / nz, sahgle / nz, lalgle / nz, lahgle / nz, glv, zsv};
}

}  // namespace drf::texture
