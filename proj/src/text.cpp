#include "qexgan/text.hpp"

#include <cstdint>

namespace qexgan {
namespace {

// Decodes one UTF-8 codepoint starting at position i; advances i past it.
// Malformed bytes are returned as-is (one byte at a time).
std::uint32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    auto cont = [&](std::size_t k) { return k < s.size() && (byte(k) & 0xc0) == 0x80; };
    if ((b0 & 0xe0) == 0xc0 && cont(i + 1)) {
        const std::uint32_t cp = ((b0 & 0x1fu) << 6) | (byte(i + 1) & 0x3fu);
        i += 2;
        return cp;
    }
    if ((b0 & 0xf0) == 0xe0 && cont(i + 1) && cont(i + 2)) {
        const std::uint32_t cp =
            ((b0 & 0x0fu) << 12) | ((byte(i + 1) & 0x3fu) << 6) | (byte(i + 2) & 0x3fu);
        i += 3;
        return cp;
    }
    if ((b0 & 0xf8) == 0xf0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
        const std::uint32_t cp = ((b0 & 0x07u) << 18) | ((byte(i + 1) & 0x3fu) << 12) |
                                 ((byte(i + 2) & 0x3fu) << 6) | (byte(i + 3) & 0x3fu);
        i += 4;
        return cp;
    }
    ++i;
    return b0;
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

std::uint32_t lower_codepoint(std::uint32_t cp) {
    // Turkish-specific pair first: I -> ı, İ -> i.
    if (cp == 0x49) return 0x131;
    if (cp == 0x130) return 0x69;
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    // Latin-1 supplement uppercase (À..Þ except ×).
    if (cp >= 0xc0 && cp <= 0xde && cp != 0xd7) return cp + 0x20;
    // Latin Extended-A is mostly even/odd upper/lower pairs; covers Ğ, Ş, Œ...
    if (cp >= 0x100 && cp <= 0x177 && (cp % 2 == 0)) return cp + 1;
    if (cp >= 0x179 && cp <= 0x17d && (cp % 2 == 1)) return cp + 1;
    return cp;
}

bool is_word_codepoint(std::uint32_t cp) {
    if (cp >= '0' && cp <= '9') return true;
    if (cp >= 'a' && cp <= 'z') return true;
    return cp >= 0x80;  // non-ASCII letters (kırmızı, ürün, ...) stay in tokens
}

}  // namespace

std::string lower_utf8(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        encode_utf8(lower_codepoint(decode_utf8(text, i)), out);
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    const std::string lowered = lower_utf8(text);
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < lowered.size()) {
        const std::size_t start = i;
        const std::uint32_t cp = decode_utf8(lowered, i);
        if (is_word_codepoint(cp)) {
            current.append(lowered, start, i - start);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

}  // namespace qexgan
