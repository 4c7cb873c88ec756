#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ttc {

// FNV-1a, 64 bit. Stable across platforms, used for content digests and
// deterministic seeding -- never for anything security sensitive.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value);

/// Digest of a whole file, formatted "fnv1a64:<16 hex digits>".
std::string digest_file(const std::string &path);

/// Same formatting for in-memory content.
std::string digest_bytes(std::string_view data);

} // namespace ttc
