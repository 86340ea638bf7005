#pragma once

// Segmentation and reconstruction quality metrics.
//
// Per-class metrics that are undefined (empty denominators, empty masks)
// return std::nullopt, printed as "Fail" and never confused with 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "discmed/errors.hpp"
#include "discmed/volume.hpp"

namespace discmed {

using MetricValue = std::optional<double>;

struct ConfusionCounts {
  std::vector<std::uint64_t> tp, fp, fn;

  int classes() const { return static_cast<int>(tp.size()); }
  /// Ground-truth voxel count of class c.
  std::uint64_t gt_count(int c) const { return tp[c] + fn[c]; }
};

inline ConfusionCounts confusion(const LabelVolume& pred, const LabelVolume& gt, int num_classes) {
  detail::require(pred.dims() == gt.dims(), "confusion: dims " + pred.dims().str() + " vs " + gt.dims().str());
  detail::require(num_classes >= 1, "confusion: need at least one class");
  ConfusionCounts k{std::vector<std::uint64_t>(num_classes), std::vector<std::uint64_t>(num_classes),
                    std::vector<std::uint64_t>(num_classes)};
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int p = pred.labels[i], g = gt.labels[i];
    detail::require(p < num_classes && g < num_classes, "confusion: label >= C");
    if (p == g) {
      ++k.tp[g];
    } else {
      ++k.fp[p];
      ++k.fn[g];
    }
  }
  return k;
}

inline MetricValue dice(const ConfusionCounts& k, int c) {
  const auto den = 2 * k.tp.at(c) + k.fp.at(c) + k.fn.at(c);
  if (den == 0) return std::nullopt;
  return 2.0 * double(k.tp[c]) / double(den);
}

inline MetricValue iou(const ConfusionCounts& k, int c) {
  const auto den = k.tp.at(c) + k.fp.at(c) + k.fn.at(c);
  if (den == 0) return std::nullopt;
  return double(k.tp[c]) / double(den);
}

/// Sum over foreground classes of IoU_c weighted by that class's share of the
/// ground-truth foreground voxels. Fail when the ground truth has no
/// foreground.
inline MetricValue weighted_miou(const ConfusionCounts& k) {
  std::uint64_t fg = 0;
  for (int c = 1; c < k.classes(); ++c) fg += k.gt_count(c);
  if (fg == 0) return std::nullopt;
  double acc = 0.0;
  for (int c = 1; c < k.classes(); ++c)
    if (k.gt_count(c) > 0) acc += double(k.gt_count(c)) / double(fg) * *iou(k, c);
  return acc;
}

/// Mean of the defined values; Fail when none is defined.
inline MetricValue mean_defined(std::span<const MetricValue> values) {
  double acc = 0.0;
  int n = 0;
  for (const auto& v : values)
    if (v) acc += *v, ++n;
  if (n == 0) return std::nullopt;
  return acc / n;
}

// ---------------------------------------------------------------------------
// Hausdorff distance

using Spacing = std::array<double, 3>;

enum class HdMode : std::uint8_t {
  pooled,        // percentile of both directed distance sets pooled together
  directed_max,  // max of the two directed percentiles
};

/// Foreground voxels with at least one face neighbor in the background. The
/// outside of the volume counts as background.
inline std::vector<std::array<std::size_t, 3>> boundary_voxels(const Grid3<std::uint8_t>& mask) {
  const Dims& n = mask.dims();
  std::vector<std::array<std::size_t, 3>> out;
  auto fg = [&](std::ptrdiff_t z, std::ptrdiff_t y, std::ptrdiff_t x) {
    if (z < 0 || y < 0 || x < 0 || z >= std::ptrdiff_t(n.d) || y >= std::ptrdiff_t(n.h) || x >= std::ptrdiff_t(n.w))
      return false;
    return mask(z, y, x) != 0;
  };
  for (std::size_t z = 0; z < n.d; ++z)
    for (std::size_t y = 0; y < n.h; ++y)
      for (std::size_t x = 0; x < n.w; ++x) {
        if (!mask(z, y, x)) continue;
        const auto Z = std::ptrdiff_t(z), Y = std::ptrdiff_t(y), X = std::ptrdiff_t(x);
        if (!fg(Z - 1, Y, X) || !fg(Z + 1, Y, X) || !fg(Z, Y - 1, X) || !fg(Z, Y + 1, X) || !fg(Z, Y, X - 1) ||
            !fg(Z, Y, X + 1))
          out.push_back({z, y, x});
      }
  return out;
}

namespace detail {

// 1-D lower envelope of parabolas (Felzenszwalb & Huttenlocher) on a strided
// line, with sample spacing `h`.
inline void edt_line(std::vector<double>& f, std::size_t n, double h, std::vector<double>& d, std::vector<int>& v,
                     std::vector<double>& zb) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    const double pq = double(q) * h;
    while (k >= 0) {
      const double pv = double(v[k]) * h;
      const double s = ((f[q] + pq * pq) - (f[v[k]] + pv * pv)) / (2.0 * (pq - pv));
      if (s <= zb[k]) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = int(q);
    zb[k] = k == 0 ? -inf : ((f[q] + pq * pq) - (f[v[k - 1]] + double(v[k - 1]) * h * double(v[k - 1]) * h)) /
                                (2.0 * (pq - double(v[k - 1]) * h));
    zb[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.begin() + std::ptrdiff_t(n), inf);
    return;
  }
  int j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double pq = double(q) * h;
    while (zb[j + 1] < pq) ++j;
    const double diff = pq - double(v[j]) * h;
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace detail

/// Exact squared Euclidean distance from every voxel to the nearest seed
/// voxel, honoring anisotropic spacing.
inline Grid3<double> squared_distance_transform(const Dims& n, std::span<const std::array<std::size_t, 3>> seeds,
                                                const Spacing& spacing) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Grid3<double> dist(n, inf);
  for (const auto& s : seeds) dist(s[0], s[1], s[2]) = 0.0;
  const std::array<std::size_t, 3> ext{n.d, n.h, n.w};
  const std::array<std::size_t, 3> step{n.h * n.w, n.w, 1};
  const std::size_t longest = std::max({n.d, n.h, n.w});
  std::vector<double> f(longest), d(longest), zb(longest + 1);
  std::vector<int> v(longest);
  for (int axis = 2; axis >= 0; --axis) {
    const std::size_t len = ext[axis];
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if ((i / step[axis]) % len != 0) continue;  // visit each line once, from its first element
      for (std::size_t q = 0; q < len; ++q) f[q] = dist[i + q * step[axis]];
      detail::edt_line(f, len, spacing[axis], d, v, zb);
      for (std::size_t q = 0; q < len; ++q) dist[i + q * step[axis]] = d[q];
    }
  }
  return dist;
}

/// Linear-interpolated quantile (q in [0, 1]) of an unsorted sample.
inline double quantile(std::vector<double> values, double q) {
  detail::require(!values.empty(), "quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - double(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

/// Distances from each boundary voxel of `from` to the nearest boundary voxel
/// of `to`.
inline std::vector<double> directed_boundary_distances(std::span<const std::array<std::size_t, 3>> from,
                                                       std::span<const std::array<std::size_t, 3>> to,
                                                       const Dims& n, const Spacing& spacing) {
  const Grid3<double> dt = squared_distance_transform(n, to, spacing);
  std::vector<double> out;
  out.reserve(from.size());
  for (const auto& p : from) out.push_back(std::sqrt(dt(p[0], p[1], p[2])));
  return out;
}

/// 95th percentile Hausdorff distance between two binary masks. Fail when
/// either mask is empty.
inline MetricValue hd95(const Grid3<std::uint8_t>& pred, const Grid3<std::uint8_t>& gt, const Spacing& spacing = {1, 1, 1},
                        HdMode mode = HdMode::pooled) {
  detail::require(pred.dims() == gt.dims(), "hd95: mask dims differ");
  for (double s : spacing) detail::require(s > 0.0 && std::isfinite(s), "hd95: spacing must be positive");
  const auto a = boundary_voxels(pred);
  const auto b = boundary_voxels(gt);
  if (a.empty() || b.empty()) return std::nullopt;
  auto ab = directed_boundary_distances(a, b, pred.dims(), spacing);
  auto ba = directed_boundary_distances(b, a, pred.dims(), spacing);
  if (mode == HdMode::directed_max) return std::max(quantile(ab, 0.95), quantile(ba, 0.95));
  ab.insert(ab.end(), ba.begin(), ba.end());
  return quantile(std::move(ab), 0.95);
}

/// Binary mask of voxels labeled c.
inline Grid3<std::uint8_t> class_mask(const LabelVolume& v, int c) {
  Grid3<std::uint8_t> out(v.dims());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.labels[i] == c;
  return out;
}

// ---------------------------------------------------------------------------
// Intensity metrics

template <class A, class B>
double mse(std::span<const A> a, std::span<const B> b) {
  detail::require(a.size() == b.size() && !a.empty(), "mse: inputs must be nonempty and equally sized");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = double(a[i]) - double(b[i]);
    acc += e * e;
  }
  return acc / double(a.size());
}

inline double mse(const CtVolume& a, const CtVolume& b) {
  detail::require(a.dims() == b.dims(), "mse: dims differ");
  return mse<float, float>(a.voxels.values(), b.voxels.values());
}

/// +inf when the inputs are identical.
inline double psnr_from_mse(double m, double peak = 1.0) {
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

inline double psnr(const CtVolume& a, const CtVolume& b, double peak = 1.0) { return psnr_from_mse(mse(a, b), peak); }

}  // namespace discmed
