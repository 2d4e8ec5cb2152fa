#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "semcom/errors.hpp"

namespace semcom {

// Little-endian canonical byte encoding. Every on-wire and on-disk format in
// the project goes through these two classes so that hashing and signing see
// one byte layout.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }

  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }

  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }

  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

  void raw(std::span<const uint8_t> bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  }

  // u32 length prefix followed by the bytes.
  void lp_bytes(std::span<const uint8_t> bytes) {
    u32(static_cast<uint32_t>(bytes.size()));
    raw(bytes);
  }

  void lp_str(const std::string& s) {
    lp_bytes({reinterpret_cast<const uint8_t*>(s.data()), s.size()});
  }

  const std::vector<uint8_t>& bytes() const { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8() {
    need(1);
    return data_[pos_++];
  }

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::span<const uint8_t> raw(size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::vector<uint8_t> lp_bytes() {
    const uint32_t n = u32();
    auto s = raw(n);
    return {s.begin(), s.end()};
  }

  std::string lp_str() {
    const uint32_t n = u32();
    auto s = raw(n);
    return {reinterpret_cast<const char*>(s.data()), s.size()};
  }

  size_t remaining() const { return data_.size() - pos_; }

  // Trailing bytes after a parse are treated as corruption.
  void expect_end() const {
    if (pos_ != data_.size()) throw DecodeError("trailing bytes after structure");
  }

 private:
  void need(size_t n) const {
    if (data_.size() - pos_ < n) throw DecodeError("truncated input");
  }

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

}  // namespace semcom
