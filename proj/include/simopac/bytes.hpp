#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace simopac {

using Bytes = std::vector<std::uint8_t>;

/// Appends big-endian integers and raw byte runs to a growing buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }

  void u16be(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
    buf_.push_back(static_cast<std::uint8_t>(v));
  }

  void u32be(std::uint32_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v >> 24));
    buf_.push_back(static_cast<std::uint8_t>(v >> 16));
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
    buf_.push_back(static_cast<std::uint8_t>(v));
  }

  void i32be(std::int32_t v) { u32be(static_cast<std::uint32_t>(v)); }

  void u64be(std::uint64_t v) {
    u32be(static_cast<std::uint32_t>(v >> 32));
    u32be(static_cast<std::uint32_t>(v));
  }

  void f64be(double v) { u64be(std::bit_cast<std::uint64_t>(v)); }

  void raw(std::span<const std::uint8_t> bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  }

  void raw(const std::string& s) {
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  std::size_t size() const { return buf_.size(); }
  const Bytes& bytes() const { return buf_; }
  Bytes take() { return std::move(buf_); }

 private:
  Bytes buf_;
};

/// Cursor over an immutable byte span. Reads return nullopt instead of
/// running past the end; callers decide how to report truncation.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  std::optional<std::uint8_t> u8() {
    if (remaining() < 1) return std::nullopt;
    return data_[pos_++];
  }

  std::optional<std::uint16_t> u16be() {
    if (remaining() < 2) return std::nullopt;
    std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
    pos_ += 2;
    return v;
  }

  std::optional<std::uint32_t> u32be() {
    if (remaining() < 4) return std::nullopt;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | data_[pos_ + i];
    pos_ += 4;
    return v;
  }

  std::optional<std::uint64_t> u64be() {
    auto hi = u32be();
    if (!hi) return std::nullopt;
    auto lo = u32be();
    if (!lo) return std::nullopt;
    return static_cast<std::uint64_t>(*hi) << 32 | *lo;
  }

  std::optional<double> f64be() {
    auto raw = u64be();
    if (!raw) return std::nullopt;
    return std::bit_cast<double>(*raw);
  }

  std::optional<std::span<const std::uint8_t>> take(std::size_t n) {
    if (remaining() < n) return std::nullopt;
    auto view = data_.subspan(pos_, n);
    pos_ += n;
    return view;
  }

  std::optional<std::string> text(std::size_t n) {
    auto view = take(n);
    if (!view) return std::nullopt;
    return std::string(view->begin(), view->end());
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::string hex_encode(std::span<const std::uint8_t> bytes);
std::optional<Bytes> hex_decode(const std::string& hex);

}  // namespace simopac
