#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "csvid/error.hpp"

namespace csvid {

// All on-disk formats are little-endian with a trailing CRC32 where the
// format says so. Writers buffer the whole payload so the checksum covers
// every preceding byte.

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void magic(const char tag[4]) { bytes(tag, 4); }

  std::uint32_t crc() const {
    return static_cast<std::uint32_t>(::crc32(0L, buf_.data(), static_cast<uInt>(buf_.size())));
  }
  void append_crc() { u32(crc()); }

  const std::vector<std::uint8_t>& buffer() const { return buf_; }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), errc::io_failure, "cannot open for write: " + path.string());
    out.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size()));
    require(out.good(), errc::io_failure, "write failed: " + path.string());
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> buf, std::string name = "")
      : buf_(std::move(buf)), name_(std::move(name)) {}

  static ByteReader from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    require(in.good(), errc::io_failure, "cannot open: " + path.string());
    auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> buf(size);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    require(in.good(), errc::io_failure, "read failed: " + path.string());
    return ByteReader(std::move(buf), path.string());
  }

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    const auto* p = take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::uint64_t u64() {
    std::uint64_t lo = u32();
    std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  void expect_magic(const char tag[4]) {
    const auto* p = take(4);
    require(std::memcmp(p, tag, 4) == 0, errc::bad_format,
            where() + "bad magic, expected '" + std::string(tag, 4) + "'");
  }

  void raw(void* dst, std::size_t n) { std::memcpy(dst, take(n), n); }

  // Verifies the trailing CRC32 against every byte before it.
  void check_crc_trailer() {
    require(buf_.size() >= pos_ + 4, errc::bad_format, where() + "truncated before checksum");
    std::size_t body = buf_.size() - 4;
    auto stored_pos = pos_;
    pos_ = body;
    std::uint32_t stored = u32();
    pos_ = stored_pos;
    auto actual =
        static_cast<std::uint32_t>(::crc32(0L, buf_.data(), static_cast<uInt>(body)));
    require(stored == actual, errc::bad_format, where() + "checksum mismatch");
  }

  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  const std::uint8_t* take(std::size_t n) {
    require(pos_ + n <= buf_.size(), errc::bad_format, where() + "truncated file");
    const std::uint8_t* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::string where() const { return name_.empty() ? "" : name_ + ": "; }

  std::vector<std::uint8_t> buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace csvid
