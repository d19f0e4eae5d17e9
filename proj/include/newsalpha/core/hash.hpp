#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace newsalpha {

// Incremental 64-bit FNV-1a. Fields are separated by a unit-separator byte so
// that ("ab","c") and ("a","bc") hash differently.
class Fnv1a {
 public:
  Fnv1a& bytes(std::string_view s) {
    for (unsigned char c : s) {
      state_ ^= c;
      state_ *= kPrime;
    }
    return *this;
  }
  Fnv1a& field(std::string_view s) {
    bytes(s);
    return bytes(std::string_view("\x1f", 1));
  }
  Fnv1a& field(std::int64_t v) { return field(std::to_string(v)); }
  Fnv1a& field(std::uint64_t v) { return field(std::to_string(v)); }

  std::uint64_t digest() const { return state_; }

 private:
  static constexpr std::uint64_t kOffset = 14695981039346656037ull;
  static constexpr std::uint64_t kPrime = 1099511628211ull;
  std::uint64_t state_ = kOffset;
};

inline std::uint64_t fnv1a(std::string_view s) { return Fnv1a{}.bytes(s).digest(); }

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t parse_hex64(std::string_view s) {
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= std::uint64_t(c - '0');
    else if (c >= 'a' && c <= 'f') v |= std::uint64_t(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') v |= std::uint64_t(c - 'A' + 10);
  }
  return v;
}

}  // namespace newsalpha
