#pragma once

// Transmission noise: AWGN on real-valued latents, independent bit flips on
// binary payloads, and a class transition matrix on label payloads. Every
// draw is keyed by (seed, element index).

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "discmed/errors.hpp"
#include "discmed/rng.hpp"
#include "discmed/volume.hpp"

namespace discmed {

enum class ChannelKind : std::uint8_t { none = 0, awgn = 1, bitflip = 2, transition = 3 };

inline std::string_view to_string(ChannelKind k) {
  switch (k) {
    case ChannelKind::none: return "none";
    case ChannelKind::awgn: return "awgn";
    case ChannelKind::bitflip: return "bitflip";
    case ChannelKind::transition: return "transition";
  }
  return "?";
}

inline ChannelKind parse_channel_kind(std::string_view s) {
  if (s == "none") return ChannelKind::none;
  if (s == "awgn") return ChannelKind::awgn;
  if (s == "bitflip") return ChannelKind::bitflip;
  if (s == "transition") return ChannelKind::transition;
  throw ContractError("unknown channel kind '" + std::string(s) + "'");
}

/// Row-major C x C matrix; entry (k, j) = P(receive j | sent k).
struct TransitionMatrix {
  int classes = 0;
  std::vector<double> p;

  double operator()(int k, int j) const { return p[std::size_t(k) * classes + j]; }
  friend bool operator==(const TransitionMatrix&, const TransitionMatrix&) = default;

  static TransitionMatrix identity(int c) {
    TransitionMatrix t{c, std::vector<double>(std::size_t(c) * c, 0.0)};
    for (int i = 0; i < c; ++i) t.p[std::size_t(i) * c + i] = 1.0;
    return t;
  }

  /// Keep the label with probability 1 - e, otherwise move to one of the
  /// other classes uniformly.
  static TransitionMatrix symmetric(int c, double e) {
    detail::require(c >= 2, "symmetric transition needs C >= 2");
    TransitionMatrix t{c, std::vector<double>(std::size_t(c) * c, e / (c - 1))};
    for (int i = 0; i < c; ++i) t.p[std::size_t(i) * c + i] = 1.0 - e;
    return t;
  }
};

inline void validate(const TransitionMatrix& t) {
  detail::require(t.classes >= 1 && t.p.size() == std::size_t(t.classes) * t.classes,
                  "transition matrix must be C x C");
  for (int k = 0; k < t.classes; ++k) {
    double sum = 0.0;
    for (int j = 0; j < t.classes; ++j) {
      const double v = t(k, j);
      detail::require(std::isfinite(v) && v >= 0.0, "transition matrix entries must be finite and >= 0");
      sum += v;
    }
    detail::require(std::abs(sum - 1.0) <= 1e-9, "transition matrix row " + std::to_string(k) + " does not sum to 1");
  }
}

/// Declared channel state. Only the parameter matching `kind` is meaningful.
struct ChannelState {
  ChannelKind kind = ChannelKind::none;
  double snr_db = 0.0;
  double flip_p = 0.0;
  TransitionMatrix transition;
  std::uint64_t seed = 0;

  friend bool operator==(const ChannelState&, const ChannelState&) = default;

  static ChannelState none() { return {}; }
  static ChannelState awgn(double snr_db, std::uint64_t seed = 0) {
    ChannelState s;
    s.kind = ChannelKind::awgn;
    s.snr_db = snr_db;
    s.seed = seed;
    return s;
  }
  static ChannelState bitflip(double p, std::uint64_t seed = 0) {
    ChannelState s;
    s.kind = ChannelKind::bitflip;
    s.flip_p = p;
    s.seed = seed;
    return s;
  }
  static ChannelState with_transition(TransitionMatrix t, std::uint64_t seed = 0) {
    ChannelState s;
    s.kind = ChannelKind::transition;
    s.transition = std::move(t);
    s.seed = seed;
    return s;
  }
};

inline void validate(const ChannelState& s) {
  switch (s.kind) {
    case ChannelKind::none: break;
    case ChannelKind::awgn: detail::require(std::isfinite(s.snr_db), "channel: snr_db must be finite"); break;
    case ChannelKind::bitflip:
      detail::require(s.flip_p >= 0.0 && s.flip_p <= 1.0, "channel: flip probability outside [0, 1]");
      break;
    case ChannelKind::transition: validate(s.transition); break;
  }
}

inline double mean_square(std::span<const double> z) {
  double acc = 0.0;
  for (double v : z) acc += v * v;
  return acc / static_cast<double>(z.size());
}

/// Noise variance for a given signal power and SNR in dB.
inline double awgn_noise_variance(double signal_power, double snr_db) {
  return signal_power * std::pow(10.0, -snr_db / 10.0);
}

/// z + n with n ~ N(0, sigma^2 I), sigma^2 = mean(z^2) * 10^(-snr/10).
inline std::vector<double> awgn_transmit(std::span<const double> z, double snr_db, std::uint64_t seed) {
  detail::require(!z.empty(), "awgn: empty signal");
  detail::require(std::isfinite(snr_db), "awgn: snr_db must be finite");
  for (double v : z) detail::require(std::isfinite(v), "awgn: non-finite signal value");
  const double power = mean_square(z);
  detail::require(power > 0.0, "awgn: all-zero signal has undefined SNR scaling");
  const double sigma = std::sqrt(awgn_noise_variance(power, snr_db));
  const rng::Stream noise(rng::derive(seed, 0xa06e));
  std::vector<double> out(z.begin(), z.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * noise.normal(i);
  return out;
}

namespace detail {
inline rng::Stream flip_stream(std::uint64_t seed) { return rng::Stream(rng::derive(seed, 0xb17f)); }
inline void require_probability(double p) {
  require(p >= 0.0 && p <= 1.0, "bitflip: probability outside [0, 1]");
}
}  // namespace detail

/// Flip each element (0/1 per byte) independently with probability p.
/// Flipping twice with the same seed restores the input.
inline std::vector<std::uint8_t> bitflip_transmit(std::span<const std::uint8_t> bits, double p, std::uint64_t seed) {
  detail::require_probability(p);
  const auto s = detail::flip_stream(seed);
  std::vector<std::uint8_t> out(bits.begin(), bits.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    detail::require(out[i] <= 1, "bitflip: element is not 0/1");
    if (s.uniform(i) < p) out[i] ^= 1;
  }
  return out;
}

/// Same flip pattern applied to the first `nbits` bits of a packed buffer
/// (bit i is bit i%8, LSB first, of byte i/8).
inline std::vector<std::uint8_t> bitflip_packed(std::span<const std::uint8_t> bytes, std::size_t nbits, double p,
                                                std::uint64_t seed) {
  detail::require_probability(p);
  detail::require(nbits <= bytes.size() * 8, "bitflip: nbits exceeds buffer");
  const auto s = detail::flip_stream(seed);
  std::vector<std::uint8_t> out(bytes.begin(), bytes.end());
  for (std::size_t i = 0; i < nbits; ++i)
    if (s.uniform(i) < p) out[i / 8] ^= std::uint8_t(1u << (i % 8));
  return out;
}

/// Replace every label k with a draw from row k of T.
inline LabelVolume label_transmit(const LabelVolume& labels, const TransitionMatrix& t, std::uint64_t seed) {
  validate(t);
  detail::require(t.classes == labels.num_classes, "label_transmit: matrix size does not match num_classes");
  const rng::Stream s(rng::derive(seed, 0x1abe1));
  LabelVolume out = labels;
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    const int k = out.labels[i];
    detail::require(k < t.classes, "label_transmit: label >= C");
    const double u = s.uniform(i);
    double cum = 0.0;
    int j = t.classes - 1;
    for (int c = 0; c < t.classes; ++c) {
      cum += t(k, c);
      if (u < cum) {
        j = c;
        break;
      }
    }
    // Trailing zero-probability classes must never be drawn by rounding.
    while (t(k, j) == 0.0 && j > 0) --j;
    out.labels[i] = static_cast<std::uint8_t>(j);
  }
  return out;
}

/// Fraction of mismatching elements; applies to bits and labels alike.
template <class T>
double measure_ber(std::span<const T> sent, std::span<const T> received) {
  detail::require(sent.size() == received.size(), "measure_ber: length mismatch");
  detail::require(!sent.empty(), "measure_ber: empty input");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < sent.size(); ++i) errors += sent[i] != received[i];
  return static_cast<double>(errors) / static_cast<double>(sent.size());
}

inline double measure_ber(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  return measure_ber<std::uint8_t>(a, b);
}

/// 10 log10(P_signal / P_noise). Returns +inf when noisy == clean.
inline double measure_snr_db(std::span<const double> clean, std::span<const double> noisy) {
  detail::require(clean.size() == noisy.size(), "measure_snr_db: length mismatch");
  detail::require(!clean.empty(), "measure_snr_db: empty input");
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    ps += clean[i] * clean[i];
    const double e = noisy[i] - clean[i];
    pn += e * e;
  }
  detail::require(ps > 0.0, "measure_snr_db: zero signal power");
  if (pn == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ps / pn);
}

}  // namespace discmed
