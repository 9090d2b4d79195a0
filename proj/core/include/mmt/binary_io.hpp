#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mmt/error.hpp"

namespace mmt::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <class T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_le(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(Errc::truncated, what + ": unexpected end of file");
  }
  return value;
}

}  // namespace mmt::io
