#include <algorithm>
#include <cmath>

#include "drf/texture.hpp"

namespace drf::texture {

Ngtdm compute_ngtdm(const QuantizedRoi& q) {
  const auto& d = q.dims();
  const auto L = static_cast<std::size_t>(q.levels);
  Ngtdm n;
  n.levels = q.levels;
  n.s.assign(L, 0.0);
  n.n.assign(L, 0.0);
  bool any_voxel = false;

  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const int g = q.grid(x, y, z);
        if (g <= 0) continue;
        any_voxel = true;
        double sum = 0.0;
        int count = 0;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              if (dx == 0 && dy == 0 && dz == 0) continue;
              const int h = q.grid.get_or(static_cast<long>(x) + dx, static_cast<long>(y) + dy,
                                          static_cast<long>(z) + dz, 0);
              if (h <= 0) continue;
              sum += h;
              ++count;
            }
        if (count == 0) continue;
        const auto gi = static_cast<std::size_t>(g - 1);
        n.s[gi] += std::fabs(static_cast<double>(g) - sum / count);
        n.n[gi] += 1.0;
      }
  if (!any_voxel) throw EmptyRoi("quantized ROI has no in-mask voxels");
  for (double c : n.n) n.valid_voxels += c;
  if (n.valid_voxels == 0.0) throw DegenerateMatrix("no in-mask voxel has an in-mask neighbour");
  n.p.resize(L);
  for (std::size_t i = 0; i < L; ++i) n.p[i] = n.n[i] / n.valid_voxels;
  return n;
}

NgtdmFeatures ngtdm_features(const Ngtdm& n) {
  const auto L = static_cast<std::size_t>(n.levels);
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < L; ++i)
    if (n.p[i] > 0.0) present.push_back(i);
  const double ng = static_cast<double>(present.size());

  double ps_sum = 0.0, s_sum = 0.0;
  for (std::size_t i : present) {
    ps_sum += n.p[i] * n.s[i];
    s_sum += n.s[i];
  }

  const double coarseness = ps_sum > kEpsilon ? std::min(1.0 / ps_sum, 1.0 / kEpsilon) : 1.0 / kEpsilon;

  double pair_contrast = 0.0, busy_den = 0.0, complexity = 0.0, strength_num = 0.0;
  for (std::size_t a : present)
    for (std::size_t b : present) {
      const double ia = static_cast<double>(a + 1), ib = static_cast<double>(b + 1);
      const double d = ia - ib;
      pair_contrast += n.p[a] * n.p[b] * d * d;
      busy_den += std::fabs(ia * n.p[a] - ib * n.p[b]);
      complexity += std::fabs(d) * (n.p[a] * n.s[a] + n.p[b] * n.s[b]) / (n.p[a] + n.p[b]);
      strength_num += (n.p[a] + n.p[b]) * d * d;
    }

  double contrast = 0.0;
  if (ng > 1.0 && n.valid_voxels > 0.0) contrast = pair_contrast / (ng * (ng - 1.0)) * (s_sum / n.valid_voxels);
  const double busyness = busy_den > kEpsilon ? ps_sum / busy_den : 0.0;
  complexity = n.valid_voxels > 0.0 ? complexity / n.valid_voxels : 0.0;
  const double strength = s_sum > kEpsilon ? strength_num / s_sum : 0.0;
  return {coarseness, contrast, busyness, complexity, strength};
}

}  // namespace drf::texture
