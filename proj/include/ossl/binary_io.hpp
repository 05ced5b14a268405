#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ossl/errors.hpp"

namespace ossl::io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Appends fixed-width integers and floats in little-endian byte order.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }
  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
  std::vector<std::uint8_t> take() noexcept { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked cursor over a byte buffer. Every failure reports the byte offset.
class ByteReader {
 public:
  ByteReader(std::string source, const std::vector<std::uint8_t>& bytes) : source_(std::move(source)), bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  const std::string& source() const noexcept { return source_; }

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(source_, pos_, what); }
  [[noreturn]] void fail_at(std::size_t offset, const std::string& what) const {
    throw FormatError(source_, offset, what);
  }

  void need(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
      fail("truncated " + std::string(what) + ": need " + std::to_string(n) + " bytes, " +
           std::to_string(remaining()) + " left");
    }
  }

  std::uint8_t u8(std::string_view what = "byte") {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint16_t u16_le(std::string_view what = "u16") { return static_cast<std::uint16_t>(le(2, what)); }
  std::uint32_t u32_le(std::string_view what = "u32") { return static_cast<std::uint32_t>(le(4, what)); }
  std::uint64_t u64_le(std::string_view what = "u64") { return le(8, what); }
  std::uint32_t u32_be(std::string_view what = "u32") {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }
  float f32_le(std::string_view what = "f32") { return std::bit_cast<float>(u32_le(what)); }

  std::string raw(std::size_t n, std::string_view what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string str(std::string_view what = "string") {
    const std::uint32_t n = u32_le(what);
    return raw(n, what);
  }
  const std::uint8_t* cursor() const noexcept { return bytes_.data() + pos_; }
  void skip(std::size_t n, std::string_view what) {
    need(n, what);
    pos_ += n;
  }

 private:
  std::uint64_t le(int width, std::string_view what) {
    need(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string source_;
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace ossl::io
