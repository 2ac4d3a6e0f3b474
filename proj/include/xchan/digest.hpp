#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace xchan {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::span<const std::uint8_t> bytes);
Sha256 sha256(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> bytes);

inline std::string sha256_hex(std::string_view text) { return to_hex(sha256(text)); }

// Hex digest of a file's content; throws xchan::Error if unreadable.
std::string file_sha256_hex(const std::filesystem::path& path);

// 64-bit FNV-1a, for seeding from text.
constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace xchan
