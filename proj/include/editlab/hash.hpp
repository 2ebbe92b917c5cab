#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace editlab {

inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ull;

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = kFnvOffset) {
    return fnv1a64(s.data(), s.size(), h);
}

inline uint64_t fnv1a64(const std::vector<double>& v, uint64_t h = kFnvOffset) {
    return fnv1a64(v.data(), v.size() * sizeof(double), h);
}

std::string hash_hex(uint64_t h);

// Content hash of a file; throws validation_error if unreadable.
uint64_t hash_file(const std::string& path);

}  // namespace editlab
