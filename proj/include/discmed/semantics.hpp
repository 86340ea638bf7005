#pragma once

// Semantic extraction: segmentation volume (labels + one-hot view) and the
// slice-wise Canny edge volume.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "discmed/errors.hpp"
#include "discmed/volume.hpp"

namespace discmed {

using OneHot = std::vector<Grid3<std::uint8_t>>;  // channel-major (C, D, H, W)

/// output[c](d, h, w) = 1 iff labels(d, h, w) == c.
inline OneHot one_hot(const Grid3<std::uint8_t>& labels, int num_classes) {
  detail::require(num_classes >= 1, "one_hot: need at least one class");
  OneHot out(num_classes, Grid3<std::uint8_t>(labels.dims()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    detail::require(l < num_classes, "one_hot: label " + std::to_string(l) + " >= C=" + std::to_string(num_classes));
    out[l][i] = 1;
  }
  return out;
}

inline OneHot one_hot(const LabelVolume& labels, int num_classes) { return one_hot(labels.labels, num_classes); }

struct SegVolume {
  LabelVolume labels;

  const Dims& dims() const { return labels.dims(); }
  int num_classes() const { return labels.num_classes; }
  OneHot one_hot() const { return discmed::one_hot(labels, labels.num_classes); }
};

/// Ground-truth labels stand in for the slice-wise segmentation model.
inline SegVolume extract_segmentation(const LabelVolume& labels) {
  validate(labels);
  return SegVolume{labels};
}

/// Nearest-intensity re-segmentation against a class intensity table. Ties go
/// to the lower class index.
inline LabelVolume segment_by_intensity(const CtVolume& vol, std::span<const double> table) {
  detail::require(!table.empty() && table.size() <= 256, "segment_by_intensity: table needs 1..256 entries");
  LabelVolume out{Grid3<std::uint8_t>(vol.dims()), static_cast<int>(table.size())};
  for (std::size_t i = 0; i < vol.voxels.size(); ++i) {
    const double v = vol.voxels[i];
    std::size_t best = 0;
    double best_dist = std::abs(v - table[0]);
    for (std::size_t c = 1; c < table.size(); ++c) {
      const double dist = std::abs(v - table[c]);
      if (dist < best_dist) best = c, best_dist = dist;
    }
    out.labels[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canny

struct CannyParams {
  double gaussian_sigma = 1.4;
  double low_threshold = 0.1;
  double high_threshold = 0.2;
  /// Thresholds are fractions of the slice's maximum gradient magnitude.
  /// When false they are absolute magnitudes.
  bool relative = true;
};

inline void validate(const CannyParams& p) {
  detail::require(p.gaussian_sigma > 0.0 && std::isfinite(p.gaussian_sigma), "canny: sigma must be positive");
  detail::require(p.low_threshold >= 0.0 && p.low_threshold < p.high_threshold,
                  "canny: thresholds must satisfy 0 <= low < high");
}

namespace canny_detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  return k;
}

inline std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

// Separable blur with edge-replicate padding.
inline Plane<double> blur(const Plane<double>& in, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const auto r = static_cast<std::ptrdiff_t>(k.size() / 2);
  Plane<double> tmp(in.h, in.w), out(in.h, in.w);
  for (std::size_t y = 0; y < in.h; ++y)
    for (std::size_t x = 0; x < in.w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -r; i <= r; ++i) acc += k[i + r] * in(y, clamp_index(std::ptrdiff_t(x) + i, in.w));
      tmp(y, x) = acc;
    }
  for (std::size_t y = 0; y < in.h; ++y)
    for (std::size_t x = 0; x < in.w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -r; i <= r; ++i) acc += k[i + r] * tmp(clamp_index(std::ptrdiff_t(y) + i, in.h), x);
      out(y, x) = acc;
    }
  return out;
}

}  // namespace canny_detail

/// Canny edge detector on one slice: Gaussian blur, Sobel gradients, 4-bucket
/// non-maximum suppression, double threshold, 8-connected hysteresis.
///
/// Non-maximum suppression keeps a pixel when its magnitude is >= the neighbor
/// behind it and > the neighbor ahead of it along the quantized gradient
/// direction, so a symmetric ridge two pixels wide thins to its second pixel.
/// Out-of-range neighbors are clamped to the border.
inline Plane<std::uint8_t> canny_slice(const Plane<double>& slice, const CannyParams& params) {
  validate(params);
  for (double v : slice.px) detail::require(std::isfinite(v), "canny: non-finite input value");
  const std::size_t h = slice.h, w = slice.w;
  Plane<std::uint8_t> edges(h, w, 0);
  if (h == 0 || w == 0) return edges;

  const Plane<double> g = canny_detail::blur(slice, params.gaussian_sigma);
  auto at = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    return g(canny_detail::clamp_index(y, h), canny_detail::clamp_index(x, w));
  };

  Plane<double> mag(h, w);
  Plane<std::uint8_t> dir(h, w);
  const double tan22 = std::tan(std::numbers::pi / 8.0);
  const double tan67 = std::tan(3.0 * std::numbers::pi / 8.0);
  double max_mag = 0.0;
  for (std::size_t yu = 0; yu < h; ++yu)
    for (std::size_t xu = 0; xu < w; ++xu) {
      const auto y = std::ptrdiff_t(yu), x = std::ptrdiff_t(xu);
      const double gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
      const double gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
      const double m = std::hypot(gx, gy);
      mag(yu, xu) = m;
      max_mag = std::max(max_mag, m);
      const double ax = std::abs(gx), ay = std::abs(gy);
      std::uint8_t d;
      if (ay < tan22 * ax) d = 0;          // gradient along w
      else if (ay >= tan67 * ax) d = 2;    // gradient along h
      else d = (gx * gy > 0.0) ? 1 : 3;    // diagonals
      dir(yu, xu) = d;
    }
  if (max_mag == 0.0) return edges;

  // (dy, dx) of the neighbor ahead along each direction bucket.
  static constexpr std::ptrdiff_t ahead[4][2] = {{0, 1}, {1, 1}, {1, 0}, {1, -1}};
  Plane<std::uint8_t> thin(h, w, 0);
  for (std::size_t yu = 0; yu < h; ++yu)
    for (std::size_t xu = 0; xu < w; ++xu) {
      const auto y = std::ptrdiff_t(yu), x = std::ptrdiff_t(xu);
      const auto* a = ahead[dir(yu, xu)];
      const double next = mag(canny_detail::clamp_index(y + a[0], h), canny_detail::clamp_index(x + a[1], w));
      const double prev = mag(canny_detail::clamp_index(y - a[0], h), canny_detail::clamp_index(x - a[1], w));
      const double m = mag(yu, xu);
      thin(yu, xu) = (m >= prev && m > next) ? 1 : 0;
    }

  const double scale = params.relative ? max_mag : 1.0;
  const double lo = params.low_threshold * scale, hi = params.high_threshold * scale;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < h * w; ++i)
    if (thin.px[i] && mag.px[i] >= hi) {
      edges.px[i] = 1;
      stack.push_back(i);
    }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const auto y = std::ptrdiff_t(i / w), x = std::ptrdiff_t(i % w);
    for (std::ptrdiff_t dy = -1; dy <= 1; ++dy)
      for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
        const auto ny = y + dy, nx = x + dx;
        if (ny < 0 || nx < 0 || ny >= std::ptrdiff_t(h) || nx >= std::ptrdiff_t(w)) continue;
        const std::size_t j = std::size_t(ny) * w + std::size_t(nx);
        if (!edges.px[j] && thin.px[j] && mag.px[j] >= lo) {
          edges.px[j] = 1;
          stack.push_back(j);
        }
      }
  }
  return edges;
}

inline Plane<double> slice_of(const CtVolume& vol, std::size_t z) {
  const auto s = vol.voxels.slice(z);
  return Plane<double>(vol.dims().h, vol.dims().w, std::vector<double>(s.begin(), s.end()));
}

/// canny_slice on every axial slice, stacked.
inline EdgeVolume extract_edges(const CtVolume& vol, const CannyParams& params) {
  detail::require(vol.domain == ValueDomain::normalized, "extract_edges: volume must be normalized");
  validate(params);
  EdgeVolume out{Grid3<std::uint8_t>(vol.dims())};
  for (std::size_t z = 0; z < vol.dims().d; ++z) {
    const auto e = canny_slice(slice_of(vol, z), params);
    std::copy(e.px.begin(), e.px.end(), out.mask.slice(z).begin());
  }
  return out;
}

}  // namespace discmed
