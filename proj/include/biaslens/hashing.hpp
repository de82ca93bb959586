#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace biaslens {

// Seeded FNV-1a over bytes. Stable across platforms and releases; corpus
// digests and feature hashing both depend on that stability.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (const char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Finalizer borrowed from SplitMix64; decorrelates the low bits (used as a
// bucket index) from the high bits (used as a sign bit).
inline std::uint64_t remix(std::uint64_t h) {
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

// Hex digest of a file's content, e.g. "fnv1a64:00a1b2...". Throws IoError
// if the file cannot be read.
std::string file_digest(const std::filesystem::path& path);

// Digest of an in-memory string, same format as file_digest.
std::string content_digest(std::string_view data);

}  // namespace biaslens
