#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace crane {

// FNV-1a, 64-bit: tiny, dependency-free content fingerprint for metrics
// digests and checkpoint inspection. Not cryptographic.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (const char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t value);

}  // namespace crane
