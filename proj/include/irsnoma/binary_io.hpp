#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string_view>
#include <type_traits>

// Little helpers for the checkpoint formats. Host byte order is assumed to
// be little-endian (x86-64, aarch64).
namespace irsnoma::io {

template <typename T>
  requires std::is_trivially_copyable_v<T>
void write_pod(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
  requires std::is_trivially_copyable_v<T>
T read_pod(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint truncated");
  return value;
}

inline void write_doubles(std::ostream& os, std::span<const double> data) {
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
}

inline void read_doubles(std::istream& is, std::span<double> out) {
  is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()));
  if (!is) throw std::runtime_error("checkpoint truncated");
}

inline void write_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  char buf[16] = {};
  if (magic.size() > sizeof(buf)) throw std::logic_error("magic too long");
  is.read(buf, static_cast<std::streamsize>(magic.size()));
  if (!is || std::memcmp(buf, magic.data(), magic.size()) != 0) {
    throw std::runtime_error("bad checkpoint header, expected " + std::string(magic));
  }
}

}  // namespace irsnoma::io
