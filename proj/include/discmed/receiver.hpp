#pragma once

// Receiver side: trilinear restoration of the latents to full resolution and
// channel-aware denoising.
//
// The denoisers are MAP neighborhood filters. For a voxel observed as class o
// the score of class c is
//     prior_strength * log((n_c + laplace) / (N + laplace * C)) + log T[c][o]
// where n_c counts class c in the window around the voxel (center excluded),
// N is the window population and T is the declared channel's transition
// matrix. The window defaults to 3x3x3: the target slice and its two axial
// neighbors.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "discmed/bits.hpp"
#include "discmed/channel.hpp"
#include "discmed/errors.hpp"
#include "discmed/semantics.hpp"
#include "discmed/volume.hpp"

namespace discmed {

// ---------------------------------------------------------------------------
// Trilinear interpolation

/// Two lattice neighbors and the weight fraction on the upper one.
struct AxisStencil {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double frac = 0.0;
};

/// Output index `o` maps to source coordinate o / stride. Past the last sample
/// both neighbors clamp to it.
inline AxisStencil axis_stencil(std::size_t o, std::size_t stride, std::size_t n) {
  const std::size_t lo = o / stride;
  if (lo + 1 >= n) return {n - 1, n - 1, 0.0};
  return {lo, lo + 1, static_cast<double>(o % stride) / static_cast<double>(stride)};
}

namespace detail {
inline std::size_t integer_stride(std::size_t target, std::size_t source, const char* axis) {
  require(source > 0 && target % source == 0,
          std::string("trilinear_upsample: target extent is not an integer multiple of the latent extent along ") +
              axis);
  return target / source;
}
}  // namespace detail

struct TrilinearPlan {
  std::vector<AxisStencil> d, h, w;

  /// The 8 weights for output voxel (z, y, x), indexed by bit pattern
  /// (dz << 2) | (dy << 1) | dx.
  std::array<double, 8> weights(std::size_t z, std::size_t y, std::size_t x) const {
    std::array<double, 8> out{};
    for (int i = 0; i < 8; ++i) {
      const double a = (i & 4) ? d[z].frac : 1.0 - d[z].frac;
      const double b = (i & 2) ? h[y].frac : 1.0 - h[y].frac;
      const double c = (i & 1) ? w[x].frac : 1.0 - w[x].frac;
      out[i] = a * b * c;
    }
    return out;
  }
};

inline TrilinearPlan plan_trilinear(const Dims& source, const Dims& target) {
  const std::size_t sd = detail::integer_stride(target.d, source.d, "D");
  const std::size_t sh = detail::integer_stride(target.h, source.h, "H");
  const std::size_t sw = detail::integer_stride(target.w, source.w, "W");
  TrilinearPlan plan;
  for (std::size_t o = 0; o < target.d; ++o) plan.d.push_back(axis_stencil(o, sd, source.d));
  for (std::size_t o = 0; o < target.h; ++o) plan.h.push_back(axis_stencil(o, sh, source.h));
  for (std::size_t o = 0; o < target.w; ++o) plan.w.push_back(axis_stencil(o, sw, source.w));
  return plan;
}

/// Weighted sum of the eight surrounding latent samples.
inline Grid3<double> trilinear_upsample(const Grid3<double>& latent, const Dims& target) {
  const TrilinearPlan plan = plan_trilinear(latent.dims(), target);
  Grid3<double> out(target);
  for (std::size_t z = 0; z < target.d; ++z)
    for (std::size_t y = 0; y < target.h; ++y)
      for (std::size_t x = 0; x < target.w; ++x) {
        const auto wgt = plan.weights(z, y, x);
        const std::size_t zs[2] = {plan.d[z].lo, plan.d[z].hi};
        const std::size_t ys[2] = {plan.h[y].lo, plan.h[y].hi};
        const std::size_t xs[2] = {plan.w[x].lo, plan.w[x].hi};
        double acc = 0.0;
        for (int i = 0; i < 8; ++i) acc += wgt[i] * latent(zs[(i >> 2) & 1], ys[(i >> 1) & 1], xs[i & 1]);
        out(z, y, x) = acc;
      }
  return out;
}

template <class T>
Grid3<double> to_real(const Grid3<T>& g) {
  return Grid3<double>(g.dims(), std::vector<double>(g.values().begin(), g.values().end()));
}

/// Per-voxel argmax over channels; ties go to the lowest channel index.
inline Grid3<std::uint8_t> argmax_channels(const std::vector<Grid3<double>>& channels) {
  detail::require(!channels.empty() && channels.size() <= 256, "argmax_channels: need 1..256 channels");
  Grid3<std::uint8_t> out(channels[0].dims());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < channels.size(); ++c)
      if (channels[c][i] > channels[best][i]) best = c;
    out[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

/// One-hot encode, interpolate each channel, take the argmax.
inline LabelVolume upsample_labels(const LabelVolume& latent, int num_classes, const Dims& target) {
  const OneHot hot = one_hot(latent, num_classes);
  std::vector<Grid3<double>> channels;
  channels.reserve(hot.size());
  for (const auto& ch : hot) channels.push_back(trilinear_upsample(to_real(ch), target));
  return LabelVolume{argmax_channels(channels), num_classes};
}

inline EdgeVolume upsample_edges(const EdgeVolume& latent, const Dims& target) {
  return EdgeVolume{upsample_labels(LabelVolume{latent.mask, 2}, 2, target).labels};
}

// ---------------------------------------------------------------------------
// Denoising

struct DenoiseConfig {
  std::array<std::size_t, 3> kernel{3, 3, 3};  // odd window extents (d, h, w)
  ChannelState channel_state;
  double prior_strength = 2.0;
  double laplace = 1.0;
  double sigma_ref = 0.05;  // continuous path: smoothing sigma = noise sigma / sigma_ref
  double sigma_max = 2.0;
  /// Clean signal power for the continuous path. When unset it is estimated
  /// from the volume being denoised.
  std::optional<double> signal_power;
};

inline void validate(const DenoiseConfig& cfg) {
  for (auto k : cfg.kernel) detail::require(k >= 1 && k % 2 == 1, "denoise: window extents must be odd and >= 1");
  detail::require(cfg.prior_strength >= 0.0 && std::isfinite(cfg.prior_strength),
                  "denoise: prior_strength must be finite and >= 0");
  detail::require(cfg.laplace > 0.0, "denoise: laplace smoothing must be positive");
  detail::require(cfg.sigma_ref > 0.0 && cfg.sigma_max >= 0.0, "denoise: invalid smoothing constants");
  validate(cfg.channel_state);
}

/// Transition matrix seen by labels sent as `width`-bit codes through a
/// bit-flip channel. Codes >= C decode to class 0.
inline TransitionMatrix bitflip_label_transition(int num_classes, double p, int width = -1) {
  detail::require(p >= 0.0 && p <= 1.0, "bitflip transition: probability outside [0, 1]");
  if (width < 0) width = bits::label_width(num_classes);
  detail::require(width <= 8, "bitflip transition: label width above 8 bits");
  TransitionMatrix t{num_classes, std::vector<double>(std::size_t(num_classes) * num_classes, 0.0)};
  const unsigned codes = 1u << width;
  for (int k = 0; k < num_classes; ++k)
    for (unsigned r = 0; r < codes; ++r) {
      const int dist = std::popcount(static_cast<unsigned>(k) ^ r);
      const double prob = std::pow(p, dist) * std::pow(1.0 - p, width - dist);
      const int j = r < unsigned(num_classes) ? int(r) : 0;
      t.p[std::size_t(k) * num_classes + j] += prob;
    }
  return t;
}

/// Labels as decoded after `width`-bit codes; out-of-range codes become 0.
inline std::uint8_t decode_label_code(unsigned code, int num_classes) {
  return code < unsigned(num_classes) ? static_cast<std::uint8_t>(code) : 0;
}

namespace detail {

inline LabelVolume map_filter(const LabelVolume& in, const TransitionMatrix& t, const DenoiseConfig& cfg) {
  const int C = in.num_classes;
  require(t.classes == C, "denoise: transition matrix is " + std::to_string(t.classes) + "x" +
                              std::to_string(t.classes) + " but volume has C=" + std::to_string(C));
  validate(in);
  std::vector<double> log_t(t.p.size());
  for (std::size_t i = 0; i < t.p.size(); ++i)
    log_t[i] = t.p[i] > 0.0 ? std::log(t.p[i]) : -std::numeric_limits<double>::infinity();

  const Dims& n = in.dims();
  const auto rd = std::ptrdiff_t(cfg.kernel[0] / 2), rh = std::ptrdiff_t(cfg.kernel[1] / 2),
             rw = std::ptrdiff_t(cfg.kernel[2] / 2);
  LabelVolume out = in;
  std::vector<int> counts(C);
  for (std::size_t z = 0; z < n.d; ++z)
    for (std::size_t y = 0; y < n.h; ++y)
      for (std::size_t x = 0; x < n.w; ++x) {
        std::fill(counts.begin(), counts.end(), 0);
        int total = 0;
        const auto z0 = std::max<std::ptrdiff_t>(0, std::ptrdiff_t(z) - rd);
        const auto z1 = std::min<std::ptrdiff_t>(std::ptrdiff_t(n.d) - 1, std::ptrdiff_t(z) + rd);
        const auto y0 = std::max<std::ptrdiff_t>(0, std::ptrdiff_t(y) - rh);
        const auto y1 = std::min<std::ptrdiff_t>(std::ptrdiff_t(n.h) - 1, std::ptrdiff_t(y) + rh);
        const auto x0 = std::max<std::ptrdiff_t>(0, std::ptrdiff_t(x) - rw);
        const auto x1 = std::min<std::ptrdiff_t>(std::ptrdiff_t(n.w) - 1, std::ptrdiff_t(x) + rw);
        for (auto zz = z0; zz <= z1; ++zz)
          for (auto yy = y0; yy <= y1; ++yy)
            for (auto xx = x0; xx <= x1; ++xx) {
              if (std::size_t(zz) == z && std::size_t(yy) == y && std::size_t(xx) == x) continue;
              ++counts[in.labels(zz, yy, xx)];
              ++total;
            }
        const int observed = in.labels(z, y, x);
        const double norm = std::log(total + cfg.laplace * C);
        int best = observed;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < C; ++c) {
          const double like = log_t[std::size_t(c) * C + observed];
          if (like == -std::numeric_limits<double>::infinity()) continue;
          const double prior = cfg.prior_strength == 0.0 ? 0.0 : std::log(counts[c] + cfg.laplace) - norm;
          const double score = cfg.prior_strength * prior + like;
          if (score > best_score) best = c, best_score = score;
        }
        out.labels(z, y, x) = static_cast<std::uint8_t>(best);
      }
  return out;
}

}  // namespace detail

/// MAP relabeling under the declared channel. Identity when the channel kind
/// is none. A bitflip channel is modeled through the transition matrix its
/// flips induce on packed label codes.
inline LabelVolume denoise_labels(const LabelVolume& labels, const DenoiseConfig& cfg) {
  validate(cfg);
  const auto& cs = cfg.channel_state;
  switch (cs.kind) {
    case ChannelKind::none: return labels;
    case ChannelKind::transition: return detail::map_filter(labels, cs.transition, cfg);
    case ChannelKind::bitflip:
      return detail::map_filter(labels, bitflip_label_transition(labels.num_classes, cs.flip_p), cfg);
    case ChannelKind::awgn: break;
  }
  throw ContractError("denoise_labels: awgn channel state applies to continuous latents only");
}

/// Two-class specialization with T = [[1-p, p], [p, 1-p]].
inline EdgeVolume denoise_edges(const EdgeVolume& edges, const DenoiseConfig& cfg) {
  validate(cfg);
  const auto& cs = cfg.channel_state;
  detail::require(cs.kind == ChannelKind::none || cs.kind == ChannelKind::bitflip,
                  "denoise_edges: channel kind must be none or bitflip");
  if (cs.kind == ChannelKind::none) return edges;
  const double p = cs.flip_p;
  const TransitionMatrix t{2, {1.0 - p, p, p, 1.0 - p}};
  return EdgeVolume{detail::map_filter(LabelVolume{edges.mask, 2}, t, cfg).labels};
}

/// Smoothing sigma (voxels) implied by the declared SNR and the received
/// signal. The received power includes the noise, so the clean power is
/// recovered as P_rx / (1 + 10^(-snr/10)).
inline double continuous_smoothing_sigma(const Grid3<double>& vol, const DenoiseConfig& cfg) {
  const double ratio = std::pow(10.0, -cfg.channel_state.snr_db / 10.0);
  const double signal = cfg.signal_power ? *cfg.signal_power : mean_square(vol.values()) / (1.0 + ratio);
  const double noise_sigma = std::sqrt(signal * ratio);
  return std::clamp(noise_sigma / cfg.sigma_ref, 0.0, cfg.sigma_max);
}

/// Gaussian smoothing scaled by the declared noise level, truncated to the
/// configured window. Identity when the channel kind is none.
inline Grid3<double> denoise_continuous(const Grid3<double>& vol, const DenoiseConfig& cfg) {
  validate(cfg);
  for (double v : vol.values()) detail::require(std::isfinite(v), "denoise_continuous: non-finite input");
  const auto& cs = cfg.channel_state;
  detail::require(cs.kind == ChannelKind::none || cs.kind == ChannelKind::awgn,
                  "denoise_continuous: channel kind must be none or awgn");
  if (cs.kind == ChannelKind::none || vol.size() == 0) return vol;
  const double sigma = continuous_smoothing_sigma(vol, cfg);
  if (sigma <= 0.0) return vol;

  Grid3<double> cur = vol;
  const Dims& n = vol.dims();
  const std::array<std::size_t, 3> ext{n.d, n.h, n.w};
  const std::array<std::size_t, 3> step{n.h * n.w, n.w, 1};
  for (int axis = 0; axis < 3; ++axis) {
    const auto r = std::ptrdiff_t(cfg.kernel[axis] / 2);
    if (r == 0 || ext[axis] == 1) continue;
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (std::ptrdiff_t i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * double(i * i) / (sigma * sigma));
    for (auto& v : k) v /= sum;
    Grid3<double> next(n);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const auto pos = std::ptrdiff_t((i / step[axis]) % ext[axis]);
      const std::size_t base = i - std::size_t(pos) * step[axis];
      double acc = 0.0;
      for (std::ptrdiff_t j = -r; j <= r; ++j) {
        const auto q = std::clamp<std::ptrdiff_t>(pos + j, 0, std::ptrdiff_t(ext[axis]) - 1);
        acc += k[j + r] * cur[base + std::size_t(q) * step[axis]];
      }
      next[i] = acc;
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace discmed
