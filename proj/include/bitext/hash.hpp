#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace bitext {

struct Hash128 {
  std::uint64_t low = 0;
  std::uint64_t high = 0;

  bool operator==(const Hash128&) const = default;
  std::string hex() const;
};

// MurmurHash3 x64_128. Output is independent of host endianness.
Hash128 murmur3_128(std::string_view data, std::uint32_t seed = 0);

struct Hash128Hasher {
  std::size_t operator()(const Hash128& h) const noexcept {
    return static_cast<std::size_t>(h.low ^ (h.high * 0x9E3779B97F4A7C15ULL));
  }
};

}  // namespace bitext
