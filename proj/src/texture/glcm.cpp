#include <algorithm>
#include <cmath>

#include "drf/texture.hpp"

namespace drf::texture {

namespace {

constexpr std::array<std::array<int, 3>, 13> kDirections = {{
    {1, 0, 0},
    {0, 1, 0},
    {0, 0, 1},
    {1, 1, 0},
    {1, -1, 0},
    {1, 0, 1},
    {1, 0, -1},
    {0, 1, 1},
    {0, 1, -1},
    {1, 1, 1},
    {1, 1, -1},
    {1, -1, 1},
    {1, -1, -1},
}};

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

}  // namespace

std::span<const std::array<int, 3>, 13> glcm_directions() { return kDirections; }

Glcm compute_glcm(const QuantizedRoi& q) {
  const auto& d = q.dims();
  const auto L = static_cast<std::size_t>(q.levels);
  std::vector<std::size_t> counts(L * L, 0);
  std::size_t pairs = 0;
  bool any_voxel = false;

  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        const int g1 = q.grid(x, y, z);
        if (g1 <= 0) continue;
        any_voxel = true;
        for (const auto& dir : kDirections) {
          const int g2 = q.grid.get_or(static_cast<long>(x) + dir[0], static_cast<long>(y) + dir[1],
                                       static_cast<long>(z) + dir[2], 0);
          if (g2 <= 0) continue;
          ++counts[static_cast<std::size_t>(g1 - 1) * L + static_cast<std::size_t>(g2 - 1)];
          ++counts[static_cast<std::size_t>(g2 - 1) * L + static_cast<std::size_t>(g1 - 1)];
          ++pairs;
        }
      }
  if (!any_voxel) throw EmptyRoi("quantized ROI has no in-mask voxels");
  if (pairs == 0) throw DegenerateMatrix("GLCM has no in-mask neighbour pairs");

  Glcm g;
  g.levels = q.levels;
  g.pair_count = pairs;
  g.p.resize(L * L);
  const double total = 2.0 * static_cast<double>(pairs);
  for (std::size_t i = 0; i < L * L; ++i) g.p[i] = static_cast<double>(counts[i]) / total;
  return g;
}

Glcm diagonal_glcm(int levels, int level) {
  Glcm g;
  g.levels = levels;
  level = std::clamp(level, 1, levels);
  g.p.assign(static_cast<std::size_t>(levels) * static_cast<std::size_t>(levels), 0.0);
  g.p[static_cast<std::size_t>(level - 1) * static_cast<std::size_t>(levels) + static_cast<std::size_t>(level - 1)] =
      1.0;
  return g;
}

GlcmFeatures glcm_features(const Glcm& g) {
  const int L = g.levels;
  const auto Ls = static_cast<std::size_t>(L);

  // Marginals; the matrix is symmetric so px == py.
  std::vector<double> px(Ls, 0.0), py(Ls, 0.0);
  std::vector<double> p_sum(2 * Ls + 1, 0.0);  // index k = i + j, 2..2L
  std::vector<double> p_diff(Ls, 0.0);         // index |i - j|, 0..L-1
  double asm_ = 0.0, contrast = 0.0, entropy = 0.0, idm = 0.0, autocorr = 0.0, dissim = 0.0, maxp = 0.0;
  for (int i = 1; i <= L; ++i)
    for (int j = 1; j <= L; ++j) {
      const double p = g(i, j);
      if (p == 0.0) continue;
      px[static_cast<std::size_t>(i - 1)] += p;
      py[static_cast<std::size_t>(j - 1)] += p;
      p_sum[static_cast<std::size_t>(i + j)] += p;
      p_diff[static_cast<std::size_t>(std::abs(i - j))] += p;
      const double dij = static_cast<double>(i - j);
      asm_ += p * p;
      contrast += dij * dij * p;
      entropy -= plogp(p);
      idm += p / (1.0 + dij * dij);
      autocorr += static_cast<double>(i) * static_cast<double>(j) * p;
      dissim += std::fabs(dij) * p;
      maxp = std::max(maxp, p);
    }

  double mux = 0.0, muy = 0.0;
  for (int i = 1; i <= L; ++i) {
    mux += i * px[static_cast<std::size_t>(i - 1)];
    muy += i * py[static_cast<std::size_t>(i - 1)];
  }
  double varx = 0.0, vary = 0.0;
  for (int i = 1; i <= L; ++i) {
    varx += (i - mux) * (i - mux) * px[static_cast<std::size_t>(i - 1)];
    vary += (i - muy) * (i - muy) * py[static_cast<std::size_t>(i - 1)];
  }

  double cov = 0.0, sos_var = 0.0, shade = 0.0;
  for (int i = 1; i <= L; ++i)
    for (int j = 1; j <= L; ++j) {
      const double p = g(i, j);
      if (p == 0.0) continue;
      cov += (i - mux) * (j - muy) * p;
      sos_var += (i - mux) * (i - mux) * p;
      const double s = i + j - mux - muy;
      shade += s * s * s * p;
    }
  const double sd = std::sqrt(varx * vary);
  const double correlation = sd > 0.0 ? cov / sd : 0.0;

  double sum_avg = 0.0, sum_entropy = 0.0;
  for (std::size_t k = 2; k <= 2 * Ls; ++k) {
    sum_avg += static_cast<double>(k) * p_sum[k];
    sum_entropy -= plogp(p_sum[k]);
  }
  double sum_var = 0.0;
  for (std::size_t k = 2; k <= 2 * Ls; ++k) {
    const double dk = static_cast<double>(k) - sum_avg;
    sum_var += dk * dk * p_sum[k];
  }

  double diff_mean = 0.0, diff_entropy = 0.0;
  for (std::size_t k = 0; k < Ls; ++k) {
    diff_mean += static_cast<double>(k) * p_diff[k];
    diff_entropy -= plogp(p_diff[k]);
  }
  double diff_var = 0.0;
  for (std::size_t k = 0; k < Ls; ++k) {
    const double dk = static_cast<double>(k) - diff_mean;
    diff_var += dk * dk * p_diff[k];
  }

  double hx = 0.0, hy = 0.0;
  for (std::size_t i = 0; i < Ls; ++i) {
    hx -= plogp(px[i]);
    hy -= plogp(py[i]);
  }
  double hxy1 = 0.0, hxy2 = 0.0;
  for (int i = 1; i <= L; ++i)
    for (int j = 1; j <= L; ++j) {
      const double pxy = px[static_cast<std::size_t>(i - 1)] * py[static_cast<std::size_t>(j - 1)];
      if (pxy <= 0.0) continue;
      const double p = g(i, j);
      if (p > 0.0) hxy1 -= p * std::log2(pxy);
      hxy2 -= pxy * std::log2(pxy);
    }
  const double hmax = std::max(hx, hy);
  const double imc1 = hmax > 0.0 ? (entropy - hxy1) / hmax : 0.0;
  const double imc2_arg = 1.0 - std::exp(-2.0 * (hxy2 - entropy));
  const double imc2 = imc2_arg > 0.0 ? std::sqrt(imc2_arg) : 0.0;

  return {asm_,     contrast,     correlation, sos_var, idm,      sum_avg,  sum_var, sum_entropy, entropy,
          diff_var, diff_entropy, imc1,        imc2,    autocorr, dissim, maxp,    shade};
}

}  // namespace drf::texture
