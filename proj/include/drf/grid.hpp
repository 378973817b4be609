#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "drf/error.hpp"

namespace drf {

struct Dims {
  std::size_t nx = 1;
  std::size_t ny = 1;
  std::size_t nz = 1;

  std::size_t count() const { return nx * ny * nz; }
  bool operator==(const Dims&) const = default;
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  double voxel_volume() const { return sx * sy * sz; }
  bool operator==(const Spacing&) const = default;
};

/// Dense 3D array stored x-fastest: index = x + nx * (y + ny * z).
template <class T>
class Grid3 {
 public:
  Grid3() = default;
  explicit Grid3(Dims dims, T fill = T{}) : dims_(dims), data_(dims.count(), fill) {
    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0)
      throw DimensionMismatch("grid dimensions must all be >= 1, got " + to_string(dims));
  }
  Grid3(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0)
      throw DimensionMismatch("grid dimensions must all be >= 1, got " + to_string(dims));
    if (data_.size() != dims.count())
      throw DimensionMismatch("grid data length " + std::to_string(data_.size()) +
                              " does not match " + to_string(dims));
  }

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims_.nx * (y + dims_.ny * z);
  }
  T& operator()(std::size_t x, std::size_t y, std::size_t z) { return data_[index(x, y, z)]; }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[index(x, y, z)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Bounds-checked read with signed coordinates; out-of-range yields `outside`.
  T get_or(long x, long y, long z, T outside) const {
    if (x < 0 || y < 0 || z < 0 || x >= static_cast<long>(dims_.nx) ||
        y >= static_cast<long>(dims_.ny) || z >= static_cast<long>(dims_.nz))
      return outside;
    return data_[index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                       static_cast<std::size_t>(z))];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid3&) const = default;

 private:
  Dims dims_{0, 0, 0};
  std::vector<T> data_;
};

}  // namespace drf
