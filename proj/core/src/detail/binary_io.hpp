#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "dispnet/types.hpp"

namespace dispnet::detail {

// Little-endian fixed-width I/O. Reads track the byte offset so truncation
// errors can point at the failing position.

template <class T>
T byteswap_if_big(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void write_le(std::ostream& out, T v) {
  v = byteswap_if_big(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
 public:
  Reader(std::istream& in, std::string what, long long offset = 0) : in_(in), what_(std::move(what)), offset_(offset) {}

  template <class T>
  T read(const char* field) {
    T v;
    bytes(reinterpret_cast<char*>(&v), sizeof(T), field);
    return byteswap_if_big(v);
  }

  void bytes(char* dst, std::size_t n, const char* field) {
    in_.read(dst, static_cast<std::streamsize>(n));
    const auto got = in_.gcount();
    if (got != static_cast<std::streamsize>(n)) {
      throw FormatError(what_ + ": truncated while reading " + field, offset_ + got);
    }
    offset_ += static_cast<long long>(n);
  }

  long long offset() const noexcept { return offset_; }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::string what_;
  long long offset_;
};

}  // namespace dispnet::detail
