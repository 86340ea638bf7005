#pragma once

// Conditional DDPM reconstruction with pluggable noise predictors.
//
// Reverse update for t = T..1:
//     x_{t-1} = (x_t - (1 - a_t) / sqrt(1 - abar_t) * eps_hat) / sqrt(a_t) + sigma_t * z
// with sigma_1 = 0. Samples live in [-1, 1]; volumes are exposed in [0, 1].
//
// Random streams: x_T uses derive(seed, 0); the noise added at step t uses
// derive(seed, t); the forward noise used by forward_diffuse uses
// derive(seed, 0xf0d). Slice k of a volume samples with derive(master, k).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "discmed/errors.hpp"
#include "discmed/rng.hpp"
#include "discmed/semantics.hpp"
#include "discmed/volume.hpp"

namespace discmed {

using Image = Plane<double>;

enum class SigmaRule : std::uint8_t {
  beta,       // sigma_t^2 = beta_t
  posterior,  // sigma_t^2 = (1 - abar_{t-1}) / (1 - abar_t) * beta_t
};

inline SigmaRule parse_sigma_rule(std::string_view s) {
  if (s == "beta") return SigmaRule::beta;
  if (s == "posterior") return SigmaRule::posterior;
  throw ContractError("unknown sigma rule '" + std::string(s) + "'");
}

/// Per-step coefficients; the accessors take the 1-based step t.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  NoiseSchedule(std::vector<double> beta, SigmaRule rule) : beta_(std::move(beta)), rule_(rule) {
    const std::size_t n = beta_.size();
    alpha_.resize(n);
    alpha_bar_.resize(n);
    sigma_.resize(n);
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      alpha_[i] = 1.0 - beta_[i];
      prod *= alpha_[i];
      alpha_bar_[i] = prod;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double prev = i == 0 ? 1.0 : alpha_bar_[i - 1];
      const double var = rule == SigmaRule::beta ? beta_[i] : (1.0 - prev) / (1.0 - alpha_bar_[i]) * beta_[i];
      sigma_[i] = i == 0 ? 0.0 : std::sqrt(var);
    }
  }

  int steps() const { return static_cast<int>(beta_.size()); }
  SigmaRule sigma_rule() const { return rule_; }
  double beta(int t) const { return beta_.at(idx(t)); }
  double alpha(int t) const { return alpha_.at(idx(t)); }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_.at(idx(t)); }
  double sigma(int t) const { return sigma_.at(idx(t)); }

 private:
  static std::size_t idx(int t) { return static_cast<std::size_t>(t - 1); }

  std::vector<double> beta_, alpha_, alpha_bar_, sigma_;
  SigmaRule rule_ = SigmaRule::beta;
};

/// Linear beta from beta_start to beta_end over T steps.
inline NoiseSchedule make_schedule(int steps, double beta_start, double beta_end, SigmaRule rule = SigmaRule::beta) {
  detail::require(steps >= 1, "make_schedule: T must be >= 1");
  detail::require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
                  "make_schedule: need 0 < beta_start <= beta_end < 1");
  std::vector<double> beta(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i)
    beta[i] = steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * double(i) / double(steps - 1);
  return NoiseSchedule(std::move(beta), rule);
}

/// The 1000-step reference endpoints (1e-4, 0.02) rescaled by 1000 / T, which
/// keeps the total noise injected by a short chain comparable.
inline NoiseSchedule make_scaled_schedule(int steps, SigmaRule rule = SigmaRule::beta) {
  detail::require(steps >= 1, "make_scaled_schedule: T must be >= 1");
  const double scale = 1000.0 / steps;
  return make_schedule(steps, 1e-4 * scale, std::min(0.02 * scale, 0.999), rule);
}

// ---------------------------------------------------------------------------
// Conditioning

/// One-hot segmentation channels of a slice, (C, H, W).
struct SegSlice {
  int classes = 0;
  std::size_t h = 0, w = 0;
  std::vector<std::uint8_t> hot;  // channel-major

  static SegSlice from_labels(const Plane<std::uint8_t>& labels, int num_classes) {
    SegSlice s{num_classes, labels.h, labels.w, std::vector<std::uint8_t>(std::size_t(num_classes) * labels.size(), 0)};
    for (std::size_t i = 0; i < labels.size(); ++i) {
      detail::require(labels.px[i] < num_classes, "SegSlice: label >= C");
      s.hot[std::size_t(labels.px[i]) * labels.size() + i] = 1;
    }
    return s;
  }
  /// Class of each pixel (argmax of the one-hot channels, lowest index on ties).
  Plane<std::uint8_t> labels() const {
    Plane<std::uint8_t> out(h, w, 0);
    const std::size_t n = h * w;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      for (int c = 1; c < classes; ++c)
        if (hot[std::size_t(c) * n + i] > hot[std::size_t(best) * n + i]) best = c;
      out.px[i] = static_cast<std::uint8_t>(best);
    }
    return out;
  }
};

/// Binary edge channel of a slice, (1, H, W).
struct EdgeSlice {
  Plane<std::uint8_t> mask;
};

/// Concat(seg channels, edge channel): C + 1 channels of H x W.
struct ConditionSlice {
  SegSlice seg;
  EdgeSlice edge;

  int channels() const { return seg.classes + 1; }
  std::size_t h() const { return seg.h; }
  std::size_t w() const { return seg.w; }

  /// Channel c of the concatenated view; c == classes is the edge channel.
  std::span<const std::uint8_t> channel(int c) const {
    const std::size_t n = seg.h * seg.w;
    if (c == seg.classes) return edge.mask.px;
    return std::span<const std::uint8_t>(seg.hot).subspan(std::size_t(c) * n, n);
  }
};

inline ConditionSlice make_condition(SegSlice seg, EdgeSlice edge) {
  detail::require(seg.h == edge.mask.h && seg.w == edge.mask.w, "make_condition: seg and edge extents differ");
  const std::size_t n = seg.h * seg.w;
  for (std::size_t i = 0; i < n; ++i) {
    int sum = 0;
    for (int c = 0; c < seg.classes; ++c) sum += seg.hot[std::size_t(c) * n + i];
    detail::require(sum == 1, "make_condition: seg channels are not one-hot");
    detail::require(edge.mask.px[i] <= 1, "make_condition: edge values must be 0 or 1");
  }
  return ConditionSlice{std::move(seg), std::move(edge)};
}

/// eps_hat = predictor(x_t, t, c)
using NoisePredictor = std::function<Image(const Image&, int, const ConditionSlice&)>;

// ---------------------------------------------------------------------------
// Forward and reverse processes

inline Image standard_normal_image(std::size_t h, std::size_t w, std::uint64_t key) {
  const rng::Stream s(key);
  Image out(h, w);
  for (std::size_t i = 0; i < out.size(); ++i) out.px[i] = s.normal(i);
  return out;
}

/// The epsilon forward_diffuse draws for (shape, seed).
inline Image forward_noise(std::size_t h, std::size_t w, std::uint64_t seed) {
  return standard_normal_image(h, w, rng::derive(seed, 0xf0d));
}

inline void require_step(int t, const NoiseSchedule& s) {
  detail::require(t >= 1 && t <= s.steps(),
                  "diffusion: step " + std::to_string(t) + " outside 1.." + std::to_string(s.steps()));
}

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
inline Image forward_diffuse(const Image& x0, int t, const NoiseSchedule& schedule, std::uint64_t seed) {
  require_step(t, schedule);
  const Image eps = forward_noise(x0.h, x0.w, seed);
  const double a = std::sqrt(schedule.alpha_bar(t)), b = std::sqrt(1.0 - schedule.alpha_bar(t));
  Image out(x0.h, x0.w);
  for (std::size_t i = 0; i < out.size(); ++i) out.px[i] = a * x0.px[i] + b * eps.px[i];
  return out;
}

inline Image reverse_step(const Image& x_t, int t, const Image& eps_hat, const NoiseSchedule& schedule,
                          std::uint64_t seed) {
  require_step(t, schedule);
  detail::require(eps_hat.h == x_t.h && eps_hat.w == x_t.w, "reverse_step: eps_hat extents differ from x_t");
  for (double v : eps_hat.px) detail::require(std::isfinite(v), "reverse_step: non-finite eps_hat");
  const double a = schedule.alpha(t);
  const double coef = (1.0 - a) / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double inv = 1.0 / std::sqrt(a);
  const double sigma = t == 1 ? 0.0 : schedule.sigma(t);
  Image out(x_t.h, x_t.w);
  for (std::size_t i = 0; i < out.size(); ++i) out.px[i] = inv * (x_t.px[i] - coef * eps_hat.px[i]);
  if (sigma > 0.0) {
    const rng::Stream z(rng::derive(seed, std::uint64_t(t)));
    for (std::size_t i = 0; i < out.size(); ++i) out.px[i] += sigma * z.normal(i);
  }
  return out;
}

/// Ancestral sampling from x_T ~ N(0, I) down to x_0.
inline Image sample(const NoisePredictor& predictor, const ConditionSlice& c, const NoiseSchedule& schedule,
                    std::uint64_t seed) {
  detail::require(schedule.steps() >= 1, "sample: empty schedule");
  Image x = standard_normal_image(c.h(), c.w(), rng::derive(seed, 0));
  for (int t = schedule.steps(); t >= 1; --t) {
    const Image eps = predictor(x, t, c);
    detail::require(eps.h == x.h && eps.w == x.w, "sample: predictor output extents differ from x_t");
    x = reverse_step(x, t, eps, schedule, seed);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Predictors

/// eps_hat such that the implied x0 estimate equals `x0_pred`.
inline Image epsilon_for(const Image& x_t, const Image& x0_pred, double alpha_bar) {
  const double a = std::sqrt(alpha_bar), b = std::sqrt(1.0 - alpha_bar);
  Image eps(x_t.h, x_t.w);
  for (std::size_t i = 0; i < eps.size(); ++i) eps.px[i] = (x_t.px[i] - a * x0_pred.px[i]) / b;
  return eps;
}

/// Exact predictor for data x0 ~ N(mu, s2 I): uses the posterior mean
/// E[x0 | x_t] = (sqrt(abar) s2 x_t + (1 - abar) mu) / (abar s2 + 1 - abar).
/// Ignores the condition.
inline NoisePredictor oracle_gaussian_predictor(double mu, double s2, NoiseSchedule schedule) {
  detail::require(s2 > 0.0 && std::isfinite(s2) && std::isfinite(mu), "oracle predictor: need finite mu and s2 > 0");
  return [mu, s2, schedule = std::move(schedule)](const Image& x_t, int t, const ConditionSlice&) {
    const double ab = schedule.alpha_bar(t);
    const double den = ab * s2 + 1.0 - ab;
    Image m(x_t.h, x_t.w);
    for (std::size_t i = 0; i < m.size(); ++i) m.px[i] = (std::sqrt(ab) * s2 * x_t.px[i] + (1.0 - ab) * mu) / den;
    return epsilon_for(x_t, m, ab);
  };
}

inline constexpr double kEdgeContrast = 0.1;

/// Class intensity per pixel, plus kEdgeContrast on edge pixels, clamped to
/// [0, 1]. Exposed range.
inline Image render_condition(const ConditionSlice& c, std::span<const double> table) {
  detail::require(table.size() >= std::size_t(c.seg.classes), "render: intensity table does not cover all classes");
  const auto labels = c.seg.labels();
  Image out(c.h(), c.w());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double base = table[labels.px[i]] + (c.edge.mask.px[i] ? kEdgeContrast : 0.0);
    out.px[i] = std::clamp(base, 0.0, 1.0);
  }
  return out;
}

/// Training-free conditional predictor: the implied x0 is the rendered
/// condition mapped to [-1, 1].
inline NoisePredictor renderer_predictor(std::vector<double> table, NoiseSchedule schedule) {
  for (double v : table) detail::require(std::isfinite(v), "renderer predictor: non-finite table entry");
  return [table = std::move(table), schedule = std::move(schedule)](const Image& x_t, int t, const ConditionSlice& c) {
    Image x0 = render_condition(c, table);
    for (auto& v : x0.px) v = 2.0 * v - 1.0;
    return epsilon_for(x_t, x0, schedule.alpha_bar(t));
  };
}

/// Sample every axial slice with c_k = Concat(seg(k), edge(k)) and stack.
inline CtVolume reconstruct_volume(const SegVolume& seg, const EdgeVolume& edge, const NoisePredictor& predictor,
                                   const NoiseSchedule& schedule, std::uint64_t seed) {
  detail::require(seg.dims() == edge.dims(), "reconstruct_volume: seg and edge dims differ");
  const Dims& n = seg.dims();
  CtVolume out{Grid3<float>(n), ValueDomain::normalized};
  for (std::size_t z = 0; z < n.d; ++z) {
    const auto ls = seg.labels.labels.slice(z);
    const auto es = edge.mask.slice(z);
    Plane<std::uint8_t> lp(n.h, n.w, std::vector<std::uint8_t>(ls.begin(), ls.end()));
    Plane<std::uint8_t> ep(n.h, n.w, std::vector<std::uint8_t>(es.begin(), es.end()));
    const ConditionSlice c = make_condition(SegSlice::from_labels(lp, seg.num_classes()), EdgeSlice{std::move(ep)});
    const Image x = sample(predictor, c, schedule, rng::derive(seed, std::uint64_t(z)));
    auto dst = out.voxels.slice(z);
    for (std::size_t i = 0; i < x.size(); ++i)
      dst[i] = static_cast<float>(std::clamp((x.px[i] + 1.0) / 2.0, 0.0, 1.0));
  }
  return out;
}

}  // namespace discmed
