#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "discmed/errors.hpp"

namespace discmed {

/// Extents of a row-major (d, h, w) volume.
struct Dims {
  std::size_t d = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t size() const { return d * h * w; }
  constexpr std::size_t index(std::size_t z, std::size_t y, std::size_t x) const {
    return (z * h + y) * w + x;
  }
  constexpr bool empty() const { return d == 0 || h == 0 || w == 0; }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;

  std::string str() const {
    return std::to_string(d) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
};

/// Dense row-major 3-D array.
template <class T>
class Grid3 {
 public:
  using value_type = T;

  Grid3() = default;
  explicit Grid3(Dims dims, T fill = T{}) : dims_(dims), data_(dims.size(), fill) {}
  Grid3(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    detail::require(data_.size() == dims_.size(), "Grid3: data size does not match dims " + dims_.str());
  }

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t z, std::size_t y, std::size_t x) { return data_[dims_.index(z, y, x)]; }
  const T& operator()(std::size_t z, std::size_t y, std::size_t x) const {
    return data_[dims_.index(z, y, x)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  /// Contiguous view of axial slice z (h*w values).
  std::span<const T> slice(std::size_t z) const {
    return std::span<const T>(data_).subspan(z * dims_.h * dims_.w, dims_.h * dims_.w);
  }
  std::span<T> slice(std::size_t z) {
    return std::span<T>(data_).subspan(z * dims_.h * dims_.w, dims_.h * dims_.w);
  }

  friend bool operator==(const Grid3&, const Grid3&) = default;

 private:
  Dims dims_{};
  std::vector<T> data_;
};

/// Dense row-major 2-D array (one axial slice).
template <class T>
struct Plane {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<T> px;

  Plane() = default;
  Plane(std::size_t rows, std::size_t cols, T fill = T{}) : h(rows), w(cols), px(rows * cols, fill) {}
  Plane(std::size_t rows, std::size_t cols, std::vector<T> data) : h(rows), w(cols), px(std::move(data)) {
    detail::require(px.size() == h * w, "Plane: data size does not match extents");
  }

  T& operator()(std::size_t y, std::size_t x) { return px[y * w + x]; }
  const T& operator()(std::size_t y, std::size_t x) const { return px[y * w + x]; }
  std::size_t size() const { return px.size(); }
  friend bool operator==(const Plane&, const Plane&) = default;
};

enum class ValueDomain : std::uint8_t { raw_hu, normalized };

/// CT intensities, either Hounsfield units or normalized to [0, 1].
struct CtVolume {
  Grid3<float> voxels;
  ValueDomain domain = ValueDomain::normalized;

  const Dims& dims() const { return voxels.dims(); }
  friend bool operator==(const CtVolume&, const CtVolume&) = default;
};

/// Per-voxel class labels in [0, num_classes).
struct LabelVolume {
  Grid3<std::uint8_t> labels;
  int num_classes = 2;

  const Dims& dims() const { return labels.dims(); }
  friend bool operator==(const LabelVolume&, const LabelVolume&) = default;
};

/// Binary mask, one byte per voxel holding 0 or 1.
struct EdgeVolume {
  Grid3<std::uint8_t> mask;

  const Dims& dims() const { return mask.dims(); }
  friend bool operator==(const EdgeVolume&, const EdgeVolume&) = default;
};

inline void validate(const LabelVolume& v) {
  detail::require(v.num_classes >= 1 && v.num_classes <= 256, "LabelVolume: num_classes must be in [1, 256]");
  for (auto l : v.labels.values())
    detail::require(l < v.num_classes, "LabelVolume: label " + std::to_string(l) + " >= num_classes " +
                                           std::to_string(v.num_classes));
}

inline void validate(const EdgeVolume& v) {
  for (auto b : v.mask.values()) detail::require(b <= 1, "EdgeVolume: mask values must be 0 or 1");
}

inline void validate(const CtVolume& v) {
  for (float x : v.voxels.values()) {
    detail::require(std::isfinite(x), "CtVolume: non-finite voxel");
    if (v.domain == ValueDomain::normalized)
      detail::require(x >= 0.0f && x <= 1.0f, "CtVolume: normalized voxel outside [0, 1]");
  }
}

}  // namespace discmed
