#pragma once

// Little-endian binary helpers shared by the ROTM/ROTD/ROTV/ROTS formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rot/error.hpp"

namespace rot::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void f64s(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }

  const std::vector<unsigned char>& buffer() const noexcept { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

// Bounds-checked reader; any overrun raises CorruptFile.
class Reader {
 public:
  explicit Reader(std::span<const unsigned char> data) : data_(data) {}

  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw Error(Errc::CorruptFile, "unexpected end of file");
  }
  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  void expect_magic(std::string_view m) {
    need(m.size());
    if (std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0) {
      throw Error(Errc::CorruptFile, "bad magic, expected " + std::string(m));
    }
    pos_ += m.size();
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  float f32() {
    float v;
    bytes(&v, 4);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, 8);
    return v;
  }
  std::string str(std::size_t max_len = 1u << 24) {
    const std::uint32_t n = u32();
    if (n > max_len) throw Error(Errc::CorruptFile, "string length out of range");
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<double> f64s(std::size_t n) {
    need(n * sizeof(double));
    std::vector<double> v(n);
    bytes(v.data(), n * sizeof(double));
    return v;
  }

  bool at_end() const noexcept { return pos_ == data_.size(); }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  std::span<const unsigned char> data_;
  std::size_t pos_ = 0;
};

// Whole-file IO. A missing or unreadable file raises IoFailure.
std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const unsigned char> data);
std::string read_text(const std::string& path);
void write_text(const std::string& path, std::string_view text);

}  // namespace rot::binio
