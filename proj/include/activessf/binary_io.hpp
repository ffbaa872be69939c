#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "activessf/errors.hpp"

namespace activessf::binary {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }
  // Appends the CRC-32 of everything written so far.
  void seal() { put(crc32(buf_)); }

  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Context for error messages: the record index being decoded.
  void set_record(long long r) noexcept { record_ = r; }

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string get_string(std::size_t max_len) {
    const auto n = get<std::uint32_t>();
    if (n > max_len) throw FormatError("string length " + std::to_string(n) + " out of range", record_);
    return get_bytes(n);
  }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }

  // Validates the trailing CRC-32 over [0, size - 4) and that nothing follows it.
  void verify_seal() {
    if (remaining() != 4) throw FormatError("unexpected bytes before checksum", record_);
    const std::uint32_t expected = crc32(bytes_.first(pos_));
    const auto stored = get<std::uint32_t>();
    if (stored != expected) throw FormatError("checksum mismatch");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("truncated file", record_);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  long long record_ = -1;
};

}  // namespace activessf::binary
