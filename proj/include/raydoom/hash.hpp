#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace raydoom {

// Incremental FNV-1a (64-bit).
class Fnv1a {
 public:
  static constexpr std::uint64_t kOffset = 0xCBF29CE484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001B3ULL;

  Fnv1a& bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      h_ ^= p[i];
      h_ *= kPrime;
    }
    return *this;
  }
  Fnv1a& bytes(std::span<const std::uint8_t> data) { return bytes(data.data(), data.size()); }
  Fnv1a& str(std::string_view s) { return bytes(s.data(), s.size()); }

  template <typename T>
  Fnv1a& pod(const T& value) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    return bytes(raw, sizeof(T));
  }

  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = kOffset;
};

inline std::uint64_t fnv1a(std::string_view s) { return Fnv1a{}.str(s).value(); }

}  // namespace raydoom
