#include "biaslens/hashing.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include "biaslens/errors.hpp"

namespace biaslens {

namespace {

std::string format_digest(std::uint64_t h) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(h));
    return std::string(buf.data());
}

}  // namespace

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read file for digest: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    std::array<char, 65536> buf;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
            h *= 0x100000001b3ULL;
        }
    }
    return format_digest(h);
}

std::string content_digest(std::string_view data) {
    return format_digest(fnv1a64(data));
}

}  // namespace biaslens
