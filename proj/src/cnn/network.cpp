#include <algorithm>
#include <cmath>
#include <random>

#include "drf/cnn.hpp"

namespace drf::cnn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t conv_out_extent(std::size_t n, int k, int stride, int pad) {
  const long span = static_cast<long>(n) + 2L * pad - k;
  if (span < 0) throw LayerError("convolution kernel larger than padded input");
  return static_cast<std::size_t>(span / stride + 1);
}

Conv3d make_conv(int in, int out) {
  Conv3d c;
  c.kx = c.ky = c.kz = 3;
  c.in_channels = in;
  c.out_channels = out;
  c.stride = 1;
  c.padding = 1;
  c.weights.assign(c.weight_count(), 0.0f);
  c.biases.assign(static_cast<std::size_t>(out), 0.0f);
  return c;
}

NetworkWeights drf_architecture() {
  NetworkWeights w;
  w.layers = {make_conv(1, kMapsPerLayer), Relu{}, MaxPool{2, 2}, make_conv(kMapsPerLayer, kMapsPerLayer),
              Relu{}};
  return w;
}

}  // namespace

void NetworkWeights::validate() const {
  int channels = -1;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto where = "layer " + std::to_string(li) + ": ";
    std::visit(Overloaded{
                   [&](const Conv3d& c) {
                     if (c.kx < 1 || c.ky < 1 || c.kz < 1 || c.in_channels < 1 || c.out_channels < 1 ||
                         c.stride < 1 || c.padding < 0)
                       throw WeightFormatError(where + "invalid conv3d shape");
                     if (c.weights.size() != c.weight_count())
                       throw WeightFormatError(where + "conv3d declares " + std::to_string(c.weight_count()) +
                                               " weights but carries " + std::to_string(c.weights.size()));
                     if (c.biases.size() != static_cast<std::size_t>(c.out_channels))
                       throw WeightFormatError(where + "conv3d bias count does not match out_channels");
                     if (channels != -1 && channels != c.in_channels)
                       throw WeightFormatError(where + "conv3d expects " + std::to_string(c.in_channels) +
                                               " input channels, previous layer yields " +
                                               std::to_string(channels));
                     channels = c.out_channels;
                   },
                   [&](const Relu&) {},
                   [&](const MaxPool& p) {
                     if (p.size < 1 || p.stride < 1) throw WeightFormatError(where + "invalid maxpool shape");
                   },
               },
               layers[li]);
  }
}

int NetworkWeights::feature_layer_count() const {
  return static_cast<int>(
      std::count_if(layers.begin(), layers.end(), [](const Layer& l) { return std::holds_alternative<Relu>(l); }));
}

int NetworkWeights::feature_layer_channels(int k) const {
  int seen = 0;
  int channels = 1;
  for (const Layer& l : layers) {
    if (const auto* c = std::get_if<Conv3d>(&l)) channels = c->out_channels;
    if (std::holds_alternative<Relu>(l) && ++seen == k) return channels;
  }
  throw LayerError("feature layer " + std::to_string(k) + " does not exist");
}

NetworkWeights he_initialized(std::uint64_t seed) {
  NetworkWeights w = drf_architecture();
  std::mt19937_64 rng(seed);
  for (Layer& l : w.layers) {
    auto* c = std::get_if<Conv3d>(&l);
    if (!c) continue;
    const double fan_in = static_cast<double>(c->in_channels) * c->kx * c->ky * c->kz;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (float& x : c->weights) x = static_cast<float>(dist(rng));
  }
  return w;
}

NetworkWeights zero_initialized() { return drf_architecture(); }

void require_drf_layout(const NetworkWeights& w) {
  w.validate();
  if (w.feature_layer_count() < 2) throw WeightFormatError("network needs at least two ReLU feature layers");
  for (int k = 1; k <= 2; ++k)
    if (w.feature_layer_channels(k) != kMapsPerLayer)
      throw WeightFormatError("feature layer " + std::to_string(k) + " has " +
                              std::to_string(w.feature_layer_channels(k)) + " maps, expected " +
                              std::to_string(kMapsPerLayer));
  const auto* first = std::get_if<Conv3d>(&w.layers.front());
  if (!first || first->in_channels != 1) throw WeightFormatError("first layer must be a 1-channel conv3d");
}

Tensor conv3d(const Conv3d& c, const Tensor& in) {
  if (in.channels != c.in_channels)
    throw LayerError("conv3d expects " + std::to_string(c.in_channels) + " channels, got " +
                     std::to_string(in.channels));
  const Dims od{conv_out_extent(in.dims.nx, c.kx, c.stride, c.padding),
                conv_out_extent(in.dims.ny, c.ky, c.stride, c.padding),
                conv_out_extent(in.dims.nz, c.kz, c.stride, c.padding)};
  Tensor out(od, c.out_channels);
  const long inx = static_cast<long>(in.dims.nx), iny = static_cast<long>(in.dims.ny),
             inz = static_cast<long>(in.dims.nz);
  const long onx = static_cast<long>(od.nx), ony = static_cast<long>(od.ny), onz = static_cast<long>(od.nz);
  const long s = c.stride, p = c.padding;

  // Output index range [lo, hi) whose source o*s + k - p lies inside [0, n).
  auto valid = [s, p](long k, long n, long on) {
    long lo = std::max(0L, (p - k + s - 1) / s);
    if (p - k < 0) lo = 0;
    long hi = std::min(on, (n - 1 + p - k) / s + 1);
    if (n - 1 + p - k < 0) hi = 0;
    return std::pair{lo, std::max(lo, hi)};
  };

  for (int o = 0; o < c.out_channels; ++o) {
    float* dst = out.channel(o);
    std::fill(dst, dst + od.count(), c.biases[static_cast<std::size_t>(o)]);
    for (int i = 0; i < c.in_channels; ++i) {
      const float* src = in.channel(i);
      for (int kz = 0; kz < c.kz; ++kz) {
        const auto [z0, z1] = valid(kz, inz, onz);
        for (int ky = 0; ky < c.ky; ++ky) {
          const auto [y0, y1] = valid(ky, iny, ony);
          for (int kx = 0; kx < c.kx; ++kx) {
            const auto [x0, x1] = valid(kx, inx, onx);
            const float wv = c.w(o, i, kz, ky, kx);
            if (wv == 0.0f) continue;
            for (long z = z0; z < z1; ++z) {
              const long sz = z * s + kz - p;
              for (long y = y0; y < y1; ++y) {
                const long sy = y * s + ky - p;
                float* drow = dst + (z * ony + y) * onx;
                const float* srow = src + (sz * iny + sy) * inx + kx - p;
                if (s == 1) {
                  for (long x = x0; x < x1; ++x) drow[x] += wv * srow[x];
                } else {
                  for (long x = x0; x < x1; ++x) drow[x] += wv * srow[x * s];
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

void relu_inplace(Tensor& t) {
  for (float& v : t.data) v = v > 0.0f ? v : 0.0f;
}

Tensor maxpool(const MaxPool& p, const Tensor& in) {
  auto extent = [&](std::size_t n) {
    if (n < static_cast<std::size_t>(p.size)) return std::size_t{1};
    return (n - static_cast<std::size_t>(p.size)) / static_cast<std::size_t>(p.stride) + 1;
  };
  const Dims od{extent(in.dims.nx), extent(in.dims.ny), extent(in.dims.nz)};
  Tensor out(od, in.channels);
  for (int c = 0; c < in.channels; ++c) {
    const float* src = in.channel(c);
    float* dst = out.channel(c);
    for (std::size_t z = 0; z < od.nz; ++z)
      for (std::size_t y = 0; y < od.ny; ++y)
        for (std::size_t x = 0; x < od.nx; ++x) {
          float best = -std::numeric_limits<float>::infinity();
          for (std::size_t dz = 0; dz < static_cast<std::size_t>(p.size); ++dz) {
            const std::size_t sz = z * p.stride + dz;
            if (sz >= in.dims.nz) break;
            for (std::size_t dy = 0; dy < static_cast<std::size_t>(p.size); ++dy) {
              const std::size_t sy = y * p.stride + dy;
              if (sy >= in.dims.ny) break;
              for (std::size_t dx = 0; dx < static_cast<std::size_t>(p.size); ++dx) {
                const std::size_t sx = x * p.stride + dx;
                if (sx >= in.dims.nx) break;
                best = std::max(best, src[(sz * in.dims.ny + sy) * in.dims.nx + sx]);
              }
            }
          }
          dst[(z * od.ny + y) * od.nx + x] = best;
        }
  }
  return out;
}

RoiMask downsample_mask_any(const RoiMask& m, int window, int stride) {
  const Dims& in = m.dims();
  auto extent = [&](std::size_t n) {
    if (n < static_cast<std::size_t>(window)) return std::size_t{1};
    return (n - static_cast<std::size_t>(window)) / static_cast<std::size_t>(stride) + 1;
  };
  const Dims od{extent(in.nx), extent(in.ny), extent(in.nz)};
  RoiMask out{Grid3<std::uint8_t>(od)};
  for (std::size_t z = 0; z < od.nz; ++z)
    for (std::size_t y = 0; y < od.ny; ++y)
      for (std::size_t x = 0; x < od.nx; ++x) {
        std::uint8_t any = 0;
        for (int dz = 0; dz < window && !any; ++dz)
          for (int dy = 0; dy < window && !any; ++dy)
            for (int dx = 0; dx < window && !any; ++dx)
              any = m.grid.get_or(static_cast<long>(x * stride + dx), static_cast<long>(y * stride + dy),
                                  static_cast<long>(z * stride + dz), 0);
        out.grid(x, y, z) = any ? 1 : 0;
      }
  return out;
}

CnnInput prepare_input(const Volume& v, const RoiMask& m, int side) {
  check_aligned(v, m);
  if (side < 1) throw Error("CNN input side must be >= 1");
  const Dims& d = m.dims();
  std::size_t lo[3] = {d.nx, d.ny, d.nz};
  std::size_t hi[3] = {0, 0, 0};
  bool any = false;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x) {
        if (!m.grid(x, y, z)) continue;
        any = true;
        const std::size_t c[3] = {x, y, z};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], c[a]);
          hi[a] = std::max(hi[a], c[a]);
        }
      }
  if (!any) throw EmptyRoi("mask has no foreground voxels");

  std::size_t ext[3];
  for (int a = 0; a < 3; ++a) ext[a] = hi[a] - lo[a] + 1;
  const std::size_t cube_side = std::max({ext[0], ext[1], ext[2]});
  std::size_t off[3];
  for (int a = 0; a < 3; ++a) off[a] = (cube_side - ext[a]) / 2;

  const Dims cd{cube_side, cube_side, cube_side};
  Grid3<double> crop(cd, 0.0);
  Grid3<std::uint8_t> crop_mask(cd, 0);
  for (std::size_t z = 0; z < ext[2]; ++z)
    for (std::size_t y = 0; y < ext[1]; ++y)
      for (std::size_t x = 0; x < ext[0]; ++x) {
        const std::size_t sx = lo[0] + x, sy = lo[1] + y, sz = lo[2] + z;
        if (!m.grid(sx, sy, sz)) continue;
        crop(off[0] + x, off[1] + y, off[2] + z) = v.grid(sx, sy, sz);
        crop_mask(off[0] + x, off[1] + y, off[2] + z) = 1;
      }

  const auto n = static_cast<std::size_t>(side);
  const Dims od{n, n, n};
  CnnInput out{Grid3<double>(od, 0.0), RoiMask{Grid3<std::uint8_t>(od, 0)}};
  std::vector<double> f(n);
  for (std::size_t j = 0; j < n; ++j)
    f[j] = detail::source_coordinate(j, static_cast<double>(cube_side), static_cast<double>(side));
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const std::uint8_t inside = detail::sample_nearest(crop_mask, f[x], f[y], f[z]);
        out.mask.grid(x, y, z) = inside;
        if (inside) out.cube(x, y, z) = detail::sample_trilinear(crop, f[x], f[y], f[z]);
      }
  return out;
}

std::vector<ActivationStack> forward_activations(const NetworkWeights& w, const Grid3<double>& cube,
                                                 const RoiMask& cube_mask, const std::set<int>& layers) {
  if (!(cube.dims() == cube_mask.dims())) throw DimensionMismatch("cube and cube mask dims differ");
  const int available = w.feature_layer_count();
  for (int k : layers)
    if (k < 1 || k > available)
      throw LayerError("requested layer " + std::to_string(k) + " but network has " + std::to_string(available) +
                       " feature layers");
  if (w.layers.empty()) throw LayerError("network has no layers");
  if (const auto* first = std::get_if<Conv3d>(&w.layers.front()); first && first->in_channels != 1)
    throw LayerError("network input expects " + std::to_string(first->in_channels) + " channels, cube has 1");

  Tensor t(cube.dims(), 1);
  for (std::size_t i = 0; i < cube.size(); ++i) t.data[i] = static_cast<float>(cube[i]);
  RoiMask mask = cube_mask;

  std::vector<ActivationStack> out;
  const int last = layers.empty() ? 0 : *layers.rbegin();
  int relu_seen = 0;
  for (const Layer& layer : w.layers) {
    if (relu_seen >= last) break;
    std::visit(Overloaded{
                   [&](const Conv3d& c) {
                     t = conv3d(c, t);
                     if (c.stride > 1 || !(t.dims == mask.dims())) {
                       // Strided or unpadded conv: each output voxel takes its stride-sized source window.
                       RoiMask shifted = downsample_mask_any(mask, std::max(1, c.stride), c.stride);
                       RoiMask fitted{Grid3<std::uint8_t>(t.dims, 0)};
                       for (std::size_t z = 0; z < t.dims.nz; ++z)
                         for (std::size_t y = 0; y < t.dims.ny; ++y)
                           for (std::size_t x = 0; x < t.dims.nx; ++x)
                             fitted.grid(x, y, z) = shifted.grid.get_or(static_cast<long>(x), static_cast<long>(y),
                                                                        static_cast<long>(z), 0);
                       mask = std::move(fitted);
                     }
                   },
                   [&](const Relu&) {
                     relu_inplace(t);
                     ++relu_seen;
                     if (!layers.contains(relu_seen)) return;
                     ActivationStack stack;
                     stack.layer_id = relu_seen;
                     stack.mask = mask;
                     stack.maps.reserve(static_cast<std::size_t>(t.channels));
                     for (int c = 0; c < t.channels; ++c) {
                       const float* src = t.channel(c);
                       stack.maps.emplace_back(t.dims, std::vector<double>(src, src + t.dims.count()));
                     }
                     out.push_back(std::move(stack));
                   },
                   [&](const MaxPool& p) {
                     t = maxpool(p, t);
                     mask = downsample_mask_any(mask, p.size, p.stride);
                   },
               },
               layer);
  }
  return out;
}

}  // namespace drf::cnn
