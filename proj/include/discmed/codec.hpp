#pragma once

// Strided-sampling compression of the semantic volumes and the latent packet
// wire format.
//
// Packet layout, all integers little-endian:
//   "DSCP" | version u8 (=1) | num_classes u16 | strides u8 x3 (d, h, w)
//   | original dims u32 x3 (D, H, W)
//   | seg payload length u64 | seg payload
//   | edge payload length u64 | edge payload
//   | channel kind u8 (0 none, 1 awgn, 2 bitflip, 3 transition) | parameter f64
//   | [kind 3 only] C*C f64, row-major
// Seg labels are packed at ceil(log2 C) bits and edge bits at 1 bit per voxel,
// both LSB first in row-major (d, h, w) order and zero-padded to a byte. The
// f64 parameter is snr_db for awgn, flip_p for bitflip and 0 otherwise. The
// channel seed is not transmitted.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "discmed/bits.hpp"
#include "discmed/channel.hpp"
#include "discmed/errors.hpp"
#include "discmed/semantics.hpp"
#include "discmed/volume.hpp"

namespace discmed {

inline constexpr std::uint8_t kPacketVersion = 1;

struct Strides {
  std::size_t d = 2;
  std::size_t h = 4;
  std::size_t w = 4;

  friend constexpr bool operator==(const Strides&, const Strides&) = default;

  bool divides(const Dims& n) const {
    return d > 0 && h > 0 && w > 0 && n.d % d == 0 && n.h % h == 0 && n.w % w == 0;
  }
  Dims reduce(const Dims& n) const { return {n.d / d, n.h / h, n.w / w}; }
  Dims expand(const Dims& n) const { return {n.d * d, n.h * h, n.w * w}; }
};

struct LatentPacket {
  LabelVolume seg_latent;
  EdgeVolume edge_latent;
  Dims original_dims;
  Strides strides;
  ChannelState channel_state;  // declared, not measured

  int num_classes() const { return seg_latent.num_classes; }
  friend bool operator==(const LatentPacket&, const LatentPacket&) = default;
};

inline void validate(const LatentPacket& p) {
  using detail::require;
  require(p.strides.d >= 1 && p.strides.d <= 255 && p.strides.h >= 1 && p.strides.h <= 255 && p.strides.w >= 1 &&
              p.strides.w <= 255,
          "packet: strides must be in [1, 255]");
  require(p.strides.expand(p.seg_latent.dims()) == p.original_dims, "packet: latent dims x strides != original dims");
  require(p.edge_latent.dims() == p.seg_latent.dims(), "packet: seg and edge latent dims differ");
  validate(p.seg_latent);
  validate(p.edge_latent);
  validate(p.channel_state);
  if (p.channel_state.kind == ChannelKind::transition)
    require(p.channel_state.transition.classes == p.num_classes(), "packet: transition matrix is not C x C");
}

namespace detail {
template <class T>
Grid3<T> subsample(const Grid3<T>& src, const Strides& s) {
  const Dims out_dims = s.reduce(src.dims());
  Grid3<T> out(out_dims);
  for (std::size_t z = 0; z < out_dims.d; ++z)
    for (std::size_t y = 0; y < out_dims.h; ++y)
      for (std::size_t x = 0; x < out_dims.w; ++x) out(z, y, x) = src(z * s.d, y * s.h, x * s.w);
  return out;
}
}  // namespace detail

/// Keep the voxel at (d*s_d, h*s_h, w*s_w) of both semantic volumes.
inline LatentPacket compress(const SegVolume& seg, const EdgeVolume& edge, const Strides& strides) {
  detail::require(seg.dims() == edge.dims(),
                  "compress: seg dims " + seg.dims().str() + " != edge dims " + edge.dims().str());
  detail::require(strides.divides(seg.dims()), "compress: strides do not divide volume dims " + seg.dims().str());
  LatentPacket p;
  p.seg_latent = LabelVolume{detail::subsample(seg.labels.labels, strides), seg.num_classes()};
  p.edge_latent = EdgeVolume{detail::subsample(edge.mask, strides)};
  p.original_dims = seg.dims();
  p.strides = strides;
  return p;
}

/// Normalized CT at 8 bits per voxel.
inline std::uint64_t original_bits(const Dims& n) { return std::uint64_t(n.size()) * 8; }

/// Seg latent at ceil(log2 C) bits per voxel plus one edge bit per voxel.
inline std::uint64_t latent_bits(const LatentPacket& p) {
  return std::uint64_t(p.seg_latent.labels.size()) * (bits::label_width(p.num_classes()) + 1);
}

inline double compression_ratio(std::uint64_t original, std::uint64_t latent) {
  detail::require(latent > 0, "compression_ratio: zero latent bits");
  return static_cast<double>(original) / static_cast<double>(latent);
}

inline std::vector<std::uint8_t> serialize(const LatentPacket& p) {
  validate(p);
  const int width = bits::label_width(p.num_classes());
  bits::Writer out;
  out.tag("DSCP");
  out.u8(kPacketVersion);
  out.u16(static_cast<std::uint16_t>(p.num_classes()));
  out.u8(std::uint8_t(p.strides.d));
  out.u8(std::uint8_t(p.strides.h));
  out.u8(std::uint8_t(p.strides.w));
  out.u32(std::uint32_t(p.original_dims.d));
  out.u32(std::uint32_t(p.original_dims.h));
  out.u32(std::uint32_t(p.original_dims.w));
  const auto seg = bits::pack(p.seg_latent.labels.values(), width);
  out.u64(seg.size());
  out.bytes(seg);
  const auto edge = bits::pack(p.edge_latent.mask.values(), 1);
  out.u64(edge.size());
  out.bytes(edge);

  const auto& cs = p.channel_state;
  out.u8(static_cast<std::uint8_t>(cs.kind));
  const double param = cs.kind == ChannelKind::awgn ? cs.snr_db : cs.kind == ChannelKind::bitflip ? cs.flip_p : 0.0;
  out.f64(param);
  if (cs.kind == ChannelKind::transition)
    for (double v : cs.transition.p) out.f64(v);
  return out.take();
}

inline LatentPacket deserialize(std::span<const std::uint8_t> data) {
  bits::Reader in(data, "latent packet");
  in.expect_tag("DSCP");
  if (const auto v = in.u8(); v != kPacketVersion)
    throw FormatError("latent packet: unsupported version " + std::to_string(v));
  const int classes = in.u16();
  if (classes < 1 || classes > 256) throw FormatError("latent packet: num_classes outside [1, 256]");
  Strides s;
  s.d = in.u8();
  s.h = in.u8();
  s.w = in.u8();
  Dims orig;
  orig.d = in.u32();
  orig.h = in.u32();
  orig.w = in.u32();
  if (!s.divides(orig)) throw FormatError("latent packet: strides inconsistent with dims " + orig.str());
  const Dims latent = s.reduce(orig);
  const std::size_t n = latent.size();
  const int width = bits::label_width(classes);

  const auto seg_len = in.u64();
  if (seg_len != bits::packed_bytes(n, width)) throw FormatError("latent packet: seg payload length mismatch");
  const auto seg_bytes = in.bytes(seg_len);
  if (!bits::padding_clear(seg_bytes, n * width)) throw FormatError("latent packet: nonzero seg padding");
  const auto edge_len = in.u64();
  if (edge_len != bits::packed_bytes(n, 1)) throw FormatError("latent packet: edge payload length mismatch");
  const auto edge_bytes = in.bytes(edge_len);
  if (!bits::padding_clear(edge_bytes, n)) throw FormatError("latent packet: nonzero edge padding");

  LatentPacket p;
  p.original_dims = orig;
  p.strides = s;
  p.seg_latent = LabelVolume{Grid3<std::uint8_t>(latent, bits::unpack(seg_bytes, n, width)), classes};
  for (auto l : p.seg_latent.labels.values())
    if (l >= classes) throw FormatError("latent packet: label >= num_classes");
  p.edge_latent = EdgeVolume{Grid3<std::uint8_t>(latent, bits::unpack(edge_bytes, n, 1))};

  const auto kind = in.u8();
  if (kind > 3) throw FormatError("latent packet: unknown channel kind " + std::to_string(kind));
  auto& cs = p.channel_state;
  cs.kind = static_cast<ChannelKind>(kind);
  const double param = in.f64();
  if (cs.kind == ChannelKind::awgn) cs.snr_db = param;
  if (cs.kind == ChannelKind::bitflip) cs.flip_p = param;
  if (cs.kind == ChannelKind::transition) {
    cs.transition.classes = classes;
    cs.transition.p.resize(std::size_t(classes) * classes);
    for (auto& v : cs.transition.p) v = in.f64();
  }
  if (in.remaining() != 0) throw FormatError("latent packet: trailing bytes");
  try {
    validate(cs);
  } catch (const ContractError& e) {
    throw FormatError(std::string("latent packet: invalid channel state: ") + e.what());
  }
  return p;
}

}  // namespace discmed
