#pragma once

// Little-endian byte I/O and LSB-first bit packing shared by the packet and
// volume formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "discmed/errors.hpp"

namespace discmed::bits {

/// Bits needed to store labels 0..C-1 (0 when C == 1).
constexpr int label_width(int num_classes) {
  return num_classes <= 1 ? 0 : std::bit_width(static_cast<unsigned>(num_classes - 1));
}

constexpr std::size_t packed_bytes(std::size_t count, int width) {
  return (count * static_cast<std::size_t>(width) + 7) / 8;
}

/// Pack `values` at `width` bits each, LSB first, padded with zeros to a byte.
inline std::vector<std::uint8_t> pack(std::span<const std::uint8_t> values, int width) {
  std::vector<std::uint8_t> out(packed_bytes(values.size(), width), 0);
  std::size_t bit = 0;
  for (auto v : values)
    for (int b = 0; b < width; ++b, ++bit)
      if ((v >> b) & 1u) out[bit / 8] |= std::uint8_t(1u << (bit % 8));
  return out;
}

inline std::vector<std::uint8_t> unpack(std::span<const std::uint8_t> bytes, std::size_t count, int width) {
  detail::require(bytes.size() * 8 >= count * static_cast<std::size_t>(width), "unpack: buffer too short");
  std::vector<std::uint8_t> out(count, 0);
  std::size_t bit = 0;
  for (auto& v : out)
    for (int b = 0; b < width; ++b, ++bit)
      if ((bytes[bit / 8] >> (bit % 8)) & 1u) v |= std::uint8_t(1u << b);
  return out;
}

/// True when every bit at position >= used_bits is zero.
inline bool padding_clear(std::span<const std::uint8_t> bytes, std::size_t used_bits) {
  for (std::size_t bit = used_bits; bit < bytes.size() * 8; ++bit)
    if ((bytes[bit / 8] >> (bit % 8)) & 1u) return false;
  return true;
}

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void tag(const char (&magic)[5]) { bytes({reinterpret_cast<const std::uint8_t*>(magic), 4}); }

  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; every overrun throws FormatError.
class Reader {
 public:
  Reader(std::span<const std::uint8_t> data, std::string what) : data_(data), what_(std::move(what)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get(4))); }
  double f64() { return std::bit_cast<double>(get(8)); }

  std::span<const std::uint8_t> bytes(std::uint64_t n) {
    need(n);
    auto out = data_.subspan(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return out;
  }

  void expect_tag(const char (&magic)[5]) {
    auto b = bytes(4);
    if (std::memcmp(b.data(), magic, 4) != 0) throw FormatError(what_ + ": bad magic");
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > remaining()) throw FormatError(what_ + ": truncated input");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace discmed::bits
