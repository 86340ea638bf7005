#pragma once

// Synthetic abdominal CT phantoms with exact ground-truth labels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "discmed/errors.hpp"
#include "discmed/rng.hpp"
#include "discmed/volume.hpp"

namespace discmed {

inline constexpr double kAirHu = -1000.0;
inline constexpr double kHuClipLow = -400.0;
inline constexpr double kHuClipHigh = 400.0;

/// One organ: an axis-aligned ellipsoid in voxel coordinates (d, h, w).
struct Organ {
  int class_id = 1;
  std::array<double, 3> center{};
  std::array<double, 3> radii{};
  double mean_hu = 0.0;
  double texture_hu = 0.0;  // value-noise amplitude

  bool contains(double z, double y, double x) const {
    const double a = (z - center[0]) / radii[0];
    const double b = (y - center[1]) / radii[1];
    const double c = (x - center[2]) / radii[2];
    return a * a + b * b + c * c <= 1.0;
  }
};

struct PhantomSpec {
  std::uint64_t seed = 0;
  Dims dims{};
  int num_classes = 2;
  std::vector<Organ> organs;        // painter's order: later entries win on overlap
  double background_texture_hu = 0.0;
  double texture_cell = 4.0;        // value-noise lattice spacing in voxels
};

struct Phantom {
  CtVolume ct;  // raw_hu
  LabelVolume labels;
};

inline void validate(const PhantomSpec& spec) {
  using detail::require;
  require(!spec.dims.empty(), "phantom: dims must have nonzero extents, got " + spec.dims.str());
  require(spec.num_classes >= 2 && spec.num_classes <= 256, "phantom: num_classes must be in [2, 256]");
  require(spec.texture_cell > 0.0, "phantom: texture_cell must be positive");
  const std::array<double, 3> ext{double(spec.dims.d), double(spec.dims.h), double(spec.dims.w)};
  std::vector<bool> seen(spec.num_classes, false);
  for (const auto& o : spec.organs) {
    require(o.class_id >= 1 && o.class_id < spec.num_classes,
            "phantom: organ class id " + std::to_string(o.class_id) + " outside 1..C-1");
    require(!seen[o.class_id], "phantom: duplicate organ class id " + std::to_string(o.class_id));
    seen[o.class_id] = true;
    for (int a = 0; a < 3; ++a) {
      require(o.radii[a] > 0.0, "phantom: ellipsoid radii must be positive");
      // Voxel centers sit at integer coordinates; the volume spans [-0.5, n - 0.5].
      require(o.center[a] - o.radii[a] >= -0.5 && o.center[a] + o.radii[a] <= ext[a] - 0.5,
              "phantom: ellipsoid for class " + std::to_string(o.class_id) + " exceeds volume bounds");
    }
    require(std::isfinite(o.mean_hu) && std::isfinite(o.texture_hu), "phantom: non-finite organ HU");
  }
}

namespace detail {

// Smooth value noise in [-1, 1]: hashed lattice values, trilinearly blended.
inline double value_noise(std::uint64_t seed, double z, double y, double x, double cell) {
  const double fz = z / cell, fy = y / cell, fx = x / cell;
  const auto iz = static_cast<std::int64_t>(std::floor(fz));
  const auto iy = static_cast<std::int64_t>(std::floor(fy));
  const auto ix = static_cast<std::int64_t>(std::floor(fx));
  const double tz = fz - iz, ty = fy - iy, tx = fx - ix;
  const std::uint64_t key = rng::derive(seed, 0x7e47);
  auto lattice = [&](std::int64_t a, std::int64_t b, std::int64_t c) {
    return 2.0 * rng::to_unit(rng::derive(key, std::uint64_t(a), std::uint64_t(b), std::uint64_t(c))) - 1.0;
  };
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double wgt = (dz ? tz : 1 - tz) * (dy ? ty : 1 - ty) * (dx ? tx : 1 - tx);
        acc += wgt * lattice(iz + dz, iy + dy, ix + dx);
      }
  return acc;
}

}  // namespace detail

/// Rasterize the organ table. Pure function of the spec.
inline Phantom generate_phantom(const PhantomSpec& spec) {
  validate(spec);
  const Dims& n = spec.dims;
  Phantom out{CtVolume{Grid3<float>(n), ValueDomain::raw_hu}, LabelVolume{Grid3<std::uint8_t>(n), spec.num_classes}};

  for (std::size_t z = 0; z < n.d; ++z)
    for (std::size_t y = 0; y < n.h; ++y)
      for (std::size_t x = 0; x < n.w; ++x) {
        int label = 0;
        double hu = kAirHu, amp = spec.background_texture_hu;
        for (const auto& o : spec.organs) {
          if (o.contains(double(z), double(y), double(x))) {
            label = o.class_id;
            hu = o.mean_hu;
            amp = o.texture_hu;
          }
        }
        if (amp != 0.0) hu += amp * detail::value_noise(spec.seed, double(z), double(y), double(x), spec.texture_cell);
        out.ct.voxels(z, y, x) = static_cast<float>(hu);
        out.labels.labels(z, y, x) = static_cast<std::uint8_t>(label);
      }
  return out;
}

/// Clip to [-400, 400] HU and map linearly onto [0, 1].
inline double normalize_hu(double hu) {
  return (std::clamp(hu, kHuClipLow, kHuClipHigh) - kHuClipLow) / (kHuClipHigh - kHuClipLow);
}

inline CtVolume normalize_hu(const CtVolume& vol) {
  detail::require(vol.domain == ValueDomain::raw_hu, "normalize_hu: input is already normalized");
  CtVolume out{vol.voxels, ValueDomain::normalized};
  for (auto& v : out.voxels.values()) {
    detail::require(std::isfinite(v), "normalize_hu: non-finite voxel");
    v = static_cast<float>(normalize_hu(double(v)));
  }
  return out;
}

/// Normalized intensity of each class before texture; class 0 is air.
inline std::vector<double> class_intensity_table(const PhantomSpec& spec) {
  std::vector<double> table(spec.num_classes, normalize_hu(kAirHu));
  for (const auto& o : spec.organs) table.at(o.class_id) = normalize_hu(o.mean_hu);
  return table;
}

/// Five-class abdominal layout scaled to `dims`: body, liver, spleen, kidney.
/// Organ HU values are spaced 200 HU apart so normalized intensities sit at
/// 0.25 / 0.5 / 0.75 / 1.0. The seed jitters organ centers by up to 4% of each
/// extent and drives the texture.
inline PhantomSpec default_abdomen_spec(Dims dims, std::uint64_t seed, double texture_hu = 15.0) {
  PhantomSpec spec;
  spec.seed = seed;
  spec.dims = dims;
  spec.num_classes = 5;
  spec.background_texture_hu = 0.0;

  const std::array<double, 3> ext{double(dims.d), double(dims.h), double(dims.w)};
  const rng::Stream jitter(rng::derive(seed, 0x0a11));
  std::uint64_t counter = 0;

  struct Layout {
    int id;
    std::array<double, 3> c, r;
    double hu;
    bool jittered;
  };
  const Layout layout[] = {
      {1, {0.5, 0.5, 0.5}, {0.47, 0.40, 0.46}, -200.0, false},
      {2, {0.5, 0.42, 0.33}, {0.36, 0.20, 0.16}, 0.0, true},
      {3, {0.5, 0.40, 0.70}, {0.30, 0.13, 0.10}, 200.0, true},
      {4, {0.5, 0.63, 0.60}, {0.28, 0.09, 0.08}, 400.0, true},
  };
  for (const auto& l : layout) {
    Organ o;
    o.class_id = l.id;
    o.mean_hu = l.hu;
    o.texture_hu = texture_hu;
    for (int a = 0; a < 3; ++a) {
      const double shift = l.jittered ? (2.0 * jitter.uniform(counter++) - 1.0) * 0.04 : 0.0;
      o.radii[a] = std::max(l.r[a] * ext[a], 0.5);
      // Keep the ellipsoid inside [-0.5, n - 0.5] after jitter.
      const double lo = o.radii[a] - 0.5, hi = ext[a] - 0.5 - o.radii[a];
      o.center[a] = std::clamp((l.c[a] + shift) * ext[a] - 0.5, lo, std::max(lo, hi));
    }
    spec.organs.push_back(o);
  }
  return spec;
}

}  // namespace discmed
