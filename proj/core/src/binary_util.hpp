#pragma once

#include "spdregime/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace spdregime::detail {

// Little-endian scalar I/O for the binary containers.

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError(std::string("truncated file while reading ") + what);
  return to_little(v);
}

inline std::string get_string(std::istream& in, const char* what, std::uint32_t max_len = 1u << 26) {
  const auto n = get<std::uint32_t>(in, what);
  if (n > max_len) throw DataError(std::string("implausible length for ") + what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw DataError(std::string("truncated file while reading ") + what);
  return s;
}

}  // namespace spdregime::detail
