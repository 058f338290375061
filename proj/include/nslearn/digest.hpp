#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace nsl {

// FNV-1a, 64-bit. Used for schema/theory/fact digests and cache keys.
class Fnv64 {
public:
  Fnv64& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ull;
    }
    return *this;
  }
  Fnv64& str(std::string_view s) {
    bytes(s.data(), s.size());
    return sep();
  }
  Fnv64& u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    return bytes(b, 8);
  }
  Fnv64& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
  Fnv64& f64(double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    __builtin_memcpy(&bits, &v, sizeof(bits));
    return u64(bits);
  }
  Fnv64& sep() {
    unsigned char z = 0xff;
    return bytes(&z, 1);
  }
  std::uint64_t value() const { return state_; }

private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

inline std::string hex_digest(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace nsl
