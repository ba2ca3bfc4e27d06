#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <system_error>

#include "flora/error.hpp"

namespace flora {

/// Little-endian encoder for the on-disk formats. Output is host-independent.
class ByteWriter {
 public:
  void magic(std::string_view tag) { buf_.append(tag); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view raw) { buf_.append(raw); }

  const std::string& str() const noexcept { return buf_; }
  std::string take() noexcept { return std::move(buf_); }

 private:
  template <class U>
  void put_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

/// Bounds-checked little-endian decoder. Failures name the byte offset.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data, std::string context = "buffer")
      : data_(data), context_(std::move(context)) {}

  void expect_magic(std::string_view tag) {
    need(tag.size(), "magic");
    if (data_.substr(pos_, tag.size()) != tag)
      fail("bad magic (expected '" + std::string(tag) + "')");
    pos_ += tag.size();
  }
  std::uint32_t expect_version(std::uint32_t supported) {
    const std::size_t at = pos_;
    const std::uint32_t v = u32();
    if (v != supported)
      fail_at(at, "unsupported version " + std::to_string(v) + " (expected " +
                      std::to_string(supported) + ")");
    return v;
  }

  std::uint8_t u8() {
    need(1, "u8");
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() { return get_le<std::uint32_t>("u32"); }
  std::uint64_t u64() { return get_le<std::uint64_t>("u64"); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>("f32")); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>("f64")); }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }

  /// Fails unless `count * width` more bytes are available; guards allocations
  /// driven by header fields.
  void require_payload(std::uint64_t count, std::size_t width, std::string_view what) {
    if (width != 0 && count > remaining() / width)
      fail("truncated " + std::string(what) + ": header promises " + std::to_string(count) +
           " x " + std::to_string(width) + " bytes, " + std::to_string(remaining()) + " available");
  }

  void expect_end() {
    if (!at_end()) fail(std::to_string(remaining()) + " trailing bytes");
  }

  [[noreturn]] void fail(const std::string& msg) const { fail_at(pos_, msg); }
  [[noreturn]] void fail_at(std::size_t at, const std::string& msg) const {
    throw FormatError(context_ + ": " + msg + " at byte offset " + std::to_string(at));
  }

 private:
  void need(std::size_t n, std::string_view what) {
    if (remaining() < n)
      fail("truncated: need " + std::to_string(n) + " bytes for " + std::string(what) + ", have " +
           std::to_string(remaining()));
  }
  template <class U>
  U get_le(std::string_view what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::string_view data_;
  std::string context_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw FormatError("read failed for '" + path.string() + "'");
  return data;
}

/// Writes through a sibling temp file and renames, so readers never observe a
/// partially written artifact.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + tmp.string() + "' for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw FormatError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw FormatError("cannot move '" + tmp.string() + "' to '" + path.string() + "'");
  }
}

}  // namespace flora
