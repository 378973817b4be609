#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <variant>
#include <vector>

#include "drf/volume.hpp"

namespace drf::cnn {

/// 3D convolution, weights laid out [out][in][kz][ky][kx]. Applied as cross-correlation.
struct Conv3d {
  int kx = 3, ky = 3, kz = 3;
  int in_channels = 1;
  int out_channels = 1;
  int stride = 1;
  int padding = 0;
  std::vector<float> weights;
  std::vector<float> biases;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kx * ky * kz;
  }
  float w(int o, int i, int z, int y, int x) const {
    return weights[(((static_cast<std::size_t>(o) * in_channels + i) * kz + z) * ky + y) * kx + x];
  }
  bool operator==(const Conv3d&) const = default;
};

struct Relu {
  bool operator==(const Relu&) const = default;
};

struct MaxPool {
  int size = 2;
  int stride = 2;
  bool operator==(const MaxPool&) const = default;
};

using Layer = std::variant<Conv3d, Relu, MaxPool>;

/// Ordered layer list. A "feature layer" k (1-based) is the output of the k-th ReLU.
struct NetworkWeights {
  std::vector<Layer> layers;

  /// Checks declared shapes against blob lengths; throws WeightFormatError.
  void validate() const;
  /// Number of ReLU outputs that can be requested from forward_activations.
  int feature_layer_count() const;
  /// Channel count of feature layer k (the out_channels of the preceding conv).
  int feature_layer_channels(int k) const;
  bool operator==(const NetworkWeights&) const = default;
};

inline constexpr int kMapsPerLayer = 20;
inline constexpr int kDefaultInputSide = 64;

/// conv3d(3^3, 1->20, pad 1) -> ReLU -> maxpool(2) -> conv3d(3^3, 20->20, pad 1) -> ReLU,
/// He-normal weights from a seeded generator, zero biases.
NetworkWeights he_initialized(std::uint64_t seed);

/// Same architecture with every weight and bias zero.
NetworkWeights zero_initialized();

/// Throws WeightFormatError unless feature layers 1 and 2 each carry kMapsPerLayer channels.
void require_drf_layout(const NetworkWeights& w);

/// Reads the binary "DRF1" format or the JSON manifest variant (detected from content).
NetworkWeights load_weights(const std::filesystem::path& path);
void save_weights(const std::filesystem::path& path, const NetworkWeights& w);
void save_weights_json(const std::filesystem::path& path, const NetworkWeights& w);

std::vector<unsigned char> encode_weights(const NetworkWeights& w);
NetworkWeights decode_weights(const std::vector<unsigned char>& bytes);

/// Multi-channel activation tensor; channel c occupies data[c * dims.count() ...].
struct Tensor {
  Dims dims{0, 0, 0};
  int channels = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(Dims d, int c) : dims(d), channels(c), data(d.count() * static_cast<std::size_t>(c), 0.0f) {}
  float* channel(int c) { return data.data() + static_cast<std::size_t>(c) * dims.count(); }
  const float* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * dims.count(); }
};

struct CnnInput {
  Grid3<double> cube;
  RoiMask mask;
};

/// Crops the mask's bounding box, zeroes voxels outside the mask, pads to a centred cube and
/// resamples to side^3 (trilinear values, nearest-neighbour mask).
CnnInput prepare_input(const Volume& v, const RoiMask& m, int side = kDefaultInputSide);

struct ActivationStack {
  int layer_id = 0;
  std::vector<Grid3<double>> maps;
  RoiMask mask;
};

/// Runs the network and returns the requested feature layers (1-based) in ascending order.
std::vector<ActivationStack> forward_activations(const NetworkWeights& w, const Grid3<double>& cube,
                                                 const RoiMask& cube_mask, const std::set<int>& layers);

// Individual layer kernels, exposed for testing.
Tensor conv3d(const Conv3d& c, const Tensor& in);
void relu_inplace(Tensor& t);
Tensor maxpool(const MaxPool& p, const Tensor& in);
/// Any-voxel downsampling: an output voxel is foreground iff any voxel of its window is.
RoiMask downsample_mask_any(const RoiMask& m, int window, int stride);

}  // namespace drf::cnn
