#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace ofa {

/// FNV-1a 64-bit over raw bytes; stable across platforms, cheap enough to
/// run over every artifact we emit.
class Digest {
 public:
  void update(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ull;
    }
  }

  void update(const std::string& s) { update(s.data(), s.size()); }

  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

std::string digest_bytes(const void* data, std::size_t size);
std::string digest_string(const std::string& s);
std::string digest_file(const std::string& path);

/// FNV-1a of the bytes as a number; stable across platforms, used to derive
/// seeds from names.
inline std::uint64_t stable_hash64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace ofa
