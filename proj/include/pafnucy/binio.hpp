#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "pafnucy/errors.hpp"

namespace pafnucy {

// Little-endian primitives for the PFNC and PFDS containers. Byte order is
// fixed on disk regardless of the host.

inline void write_bytes(std::ostream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    }
  }
  write_bytes(out, buf, sizeof(T));
}

inline void read_bytes(std::istream& in, void* p, size_t n,
                       const char* what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) {
    throw IoError(std::string("truncated file while reading ") + what);
  }
}

template <class T>
T read_le(std::istream& in, const char* what) {
  unsigned char buf[sizeof(T)];
  read_bytes(in, buf, sizeof(T), what);
  if constexpr (std::endian::native == std::endian::big) {
    for (size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    }
  }
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_le<uint32_t>(out, static_cast<uint32_t>(s.size()));
  write_bytes(out, s.data(), s.size());
}

inline std::string read_string(std::istream& in, const char* what) {
  const uint32_t n = read_le<uint32_t>(in, what);
  if (n > (1u << 20)) {
    throw IoError(std::string("implausible string length for ") + what);
  }
  std::string s(n, '\0');
  if (n > 0) read_bytes(in, s.data(), n, what);
  return s;
}

}  // namespace pafnucy
