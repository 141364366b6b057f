#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace zeronas {

// Base error for everything the engine can reject.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed textual input (arch strings, config files, benchmark tables).
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t byte_offset)
      : Error(msg + " (byte " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::size_t offset;
};

// Non-finite values or numerically impossible requests.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures (missing inputs, unwritable outputs).
class IoError : public Error {
 public:
  using Error::Error;
};

// FNV-1a, used for config fingerprints and input checksums.
inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t seed = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t seed = 1469598103934665603ull) {
  return fnv1a64(s.data(), s.size(), seed);
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace zeronas
