#pragma once

// Volume file format, all integers little-endian:
//   "DSCV" | version u8 (=1) | dtype u8 | num_classes u16 | dims u32 x3 (D, H, W)
//   | payload, row-major (d, h, w)
// dtype 0: f32 intensities (num_classes 0)
// dtype 1: u8 labels
// dtype 2: bit-packed binary mask, LSB first, padded to a byte at the end of
//          the whole volume (num_classes 0)
//
// f32 volumes carry no domain tag; on read they are tagged normalized when
// every value lies in [0, 1] and raw_hu otherwise.

#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "discmed/bits.hpp"
#include "discmed/errors.hpp"
#include "discmed/volume.hpp"

namespace discmed {

inline constexpr std::uint8_t kVolumeVersion = 1;

enum class VolumeDtype : std::uint8_t { f32 = 0, u8_labels = 1, bitpacked = 2 };

using AnyVolume = std::variant<CtVolume, LabelVolume, EdgeVolume>;

namespace detail {
inline void write_header(bits::Writer& out, VolumeDtype dtype, int classes, const Dims& n) {
  out.tag("DSCV");
  out.u8(kVolumeVersion);
  out.u8(static_cast<std::uint8_t>(dtype));
  out.u16(static_cast<std::uint16_t>(classes));
  out.u32(static_cast<std::uint32_t>(n.d));
  out.u32(static_cast<std::uint32_t>(n.h));
  out.u32(static_cast<std::uint32_t>(n.w));
}
}  // namespace detail

inline std::vector<std::uint8_t> encode_volume(const CtVolume& v) {
  validate(v);
  bits::Writer out;
  detail::write_header(out, VolumeDtype::f32, 0, v.dims());
  for (float x : v.voxels.values()) out.f32(x);
  return out.take();
}

inline std::vector<std::uint8_t> encode_volume(const LabelVolume& v) {
  validate(v);
  bits::Writer out;
  detail::write_header(out, VolumeDtype::u8_labels, v.num_classes, v.dims());
  out.bytes(v.labels.values());
  return out.take();
}

inline std::vector<std::uint8_t> encode_volume(const EdgeVolume& v) {
  validate(v);
  bits::Writer out;
  detail::write_header(out, VolumeDtype::bitpacked, 0, v.dims());
  out.bytes(bits::pack(v.mask.values(), 1));
  return out.take();
}

inline AnyVolume decode_volume(std::span<const std::uint8_t> data) {
  bits::Reader in(data, "volume");
  in.expect_tag("DSCV");
  if (const auto v = in.u8(); v != kVolumeVersion) throw FormatError("volume: unsupported version " + std::to_string(v));
  const auto dtype = in.u8();
  const int classes = in.u16();
  Dims n;
  n.d = in.u32();
  n.h = in.u32();
  n.w = in.u32();
  if (n.empty()) throw FormatError("volume: zero extent in dims " + n.str());
  const std::size_t count = n.size();

  AnyVolume out;
  switch (static_cast<VolumeDtype>(dtype)) {
    case VolumeDtype::f32: {
      if (in.remaining() != count * 4) throw FormatError("volume: f32 payload size mismatch");
      CtVolume v{Grid3<float>(n), ValueDomain::normalized};
      bool in_unit = true;
      for (auto& x : v.voxels.values()) {
        x = in.f32();
        if (!std::isfinite(x)) throw FormatError("volume: non-finite voxel");
        in_unit = in_unit && x >= 0.0f && x <= 1.0f;
      }
      v.domain = in_unit ? ValueDomain::normalized : ValueDomain::raw_hu;
      out = std::move(v);
      break;
    }
    case VolumeDtype::u8_labels: {
      if (classes < 1 || classes > 256) throw FormatError("volume: num_classes outside [1, 256]");
      if (in.remaining() != count) throw FormatError("volume: label payload size mismatch");
      const auto b = in.bytes(count);
      LabelVolume v{Grid3<std::uint8_t>(n, std::vector<std::uint8_t>(b.begin(), b.end())), classes};
      for (auto l : v.labels.values())
        if (l >= classes) throw FormatError("volume: label >= num_classes");
      out = std::move(v);
      break;
    }
    case VolumeDtype::bitpacked: {
      const std::size_t bytes = bits::packed_bytes(count, 1);
      if (in.remaining() != bytes) throw FormatError("volume: bit-packed payload size mismatch");
      const auto b = in.bytes(bytes);
      if (!bits::padding_clear(b, count)) throw FormatError("volume: nonzero padding bits");
      out = EdgeVolume{Grid3<std::uint8_t>(n, bits::unpack(b, count, 1))};
      break;
    }
    default: throw FormatError("volume: unknown dtype " + std::to_string(dtype));
  }
  return out;
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open '" + path + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), {});
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("write to '" + path + "' failed");
}

template <class V>
void write_volume(const std::string& path, const V& v) {
  write_file(path, encode_volume(v));
}

inline AnyVolume read_volume(const std::string& path) { return decode_volume(read_file(path)); }

/// Read a volume and require a specific type.
template <class V>
V read_volume_as(const std::string& path) {
  auto any = read_volume(path);
  if (auto* v = std::get_if<V>(&any)) return std::move(*v);
  throw FormatError("'" + path + "' holds a different volume dtype");
}

}  // namespace discmed
