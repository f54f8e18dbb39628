#pragma once

// Little-endian encode/decode helpers shared by the archive and checkpoint
// formats. Independent of host byte order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srcv/errors.hpp"

namespace srcv::io {

class ByteWriter {
 public:
  template <class T>
  void put_uint(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bytes_.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
    }
  }
  void put_f32(float v) { put_uint(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put_uint(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  const std::vector<char>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<char> bytes_;
};

// Bounds-checked cursor; reading past the end throws TruncatedPayload.
class ByteReader {
 public:
  explicit ByteReader(std::span<const char> bytes) : bytes_(bytes) {}

  template <class T>
  T get_uint() {
    require(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  float get_f32() { return std::bit_cast<float>(get_uint<std::uint32_t>()); }
  double get_f64() { return std::bit_cast<double>(get_uint<std::uint64_t>()); }
  std::string get_bytes(std::size_t n) {
    require(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

 private:
  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::TruncatedPayload, "need " + std::to_string(n) + " bytes at offset " +
                                                   std::to_string(pos_) + ", have " +
                                                   std::to_string(bytes_.size() - pos_));
    }
  }

  std::span<const char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace srcv::io
