#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace kgi {

// FNV-1a 64-bit. Used for content-addressed cache keys and manifest digests;
// stability beats cryptographic strength here.
inline uint64_t fnv1a64(std::string_view data, uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(uint64_t v);

// Digest of a whole file's bytes as "fnv64:<16 hex>". Throws kgi::Error
// (MissingFile) when the file cannot be read.
std::string digest_file(const std::filesystem::path& p);

inline std::string digest_string(std::string_view data) {
    return "fnv64:" + hex64(fnv1a64(data));
}

}  // namespace kgi
