#include "biaslens/tokenize.hpp"

#include <cstdint>

namespace biaslens {

namespace {

// Decodes one UTF-8 code point starting at i; advances i. Malformed bytes
// decode as U+FFFD one byte at a time, which keeps the scan total.
std::uint32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto byte = [&](std::size_t k) {
        return static_cast<std::uint8_t>(s[k]);
    };
    const std::uint8_t b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    std::uint32_t cp = 0;
    if ((b0 & 0xe0) == 0xc0) {
        len = 2;
        cp = b0 & 0x1f;
    } else if ((b0 & 0xf0) == 0xe0) {
        len = 3;
        cp = b0 & 0x0f;
    } else if ((b0 & 0xf8) == 0xf0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xfffd;
    }
    if (i + len > s.size()) {
        ++i;
        return 0xfffd;
    }
    for (int k = 1; k < len; ++k) {
        if ((byte(i + k) & 0xc0) != 0x80) {
            ++i;
            return 0xfffd;
        }
        cp = (cp << 6) | (byte(i + k) & 0x3f);
    }
    i += len;
    return cp;
}

void encode_utf8(std::uint32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
        out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
}

bool is_word_cp(std::uint32_t cp) {
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
               (cp >= 'A' && cp <= 'Z');
    }
    // Latin-1 punctuation/symbols, general punctuation (includes U+2026
    // ellipsis), CJK symbols/punctuation, replacement char.
    if (cp >= 0x00a0 && cp <= 0x00bf) return false;
    if (cp >= 0x2000 && cp <= 0x206f) return false;
    if (cp >= 0x3000 && cp <= 0x303f) return false;
    if (cp == 0xfffd) return false;
    return true;
}

std::uint32_t lower_cp(std::uint32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0x00c0 && cp <= 0x00de && cp != 0x00d7) return cp + 0x20;
    return cp;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    std::size_t dot_run = 0;

    const auto flush_word = [&] {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };
    const auto flush_dots = [&] {
        if (dot_run >= 3) tokens.emplace_back(kMaskToken);
        dot_run = 0;
    };

    while (i < text.size()) {
        const std::uint32_t cp = decode_utf8(text, i);
        if (cp == '.') {
            flush_word();
            ++dot_run;
            continue;
        }
        if (cp == 0x2026) {  // U+2026 HORIZONTAL ELLIPSIS
            flush_word();
            flush_dots();
            tokens.emplace_back(kMaskToken);
            continue;
        }
        flush_dots();
        if (is_word_cp(cp)) {
            encode_utf8(lower_cp(cp), current);
        } else {
            flush_word();
        }
    }
    flush_word();
    flush_dots();
    return tokens;
}

}  // namespace biaslens
