#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ruleocr {

// FNV-1a, 64-bit; used for dataset content hashes.
struct Fnv1a64 {
  std::uint64_t h = 14695981039346656037ULL;

  void update(std::span<const std::uint8_t> bytes) {
    for (std::uint8_t b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  void update_text(std::string_view text) {
    update({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  }
  std::uint64_t digest() const { return h; }
};

inline std::string to_hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace ruleocr
