#include "absa/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "absa/errors.hpp"

namespace absa {

std::u32string utf8_decode(std::string_view bytes) {
    std::u32string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    const auto n = bytes.size();
    while (i < n) {
        unsigned char b0 = static_cast<unsigned char>(bytes[i]);
        char32_t cp = 0;
        std::size_t len = 0;
        if (b0 < 0x80) {
            cp = b0;
            len = 1;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            len = 2;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            len = 3;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            len = 4;
        } else {
            throw ParseError("invalid UTF-8 lead byte at offset " + std::to_string(i));
        }
        if (i + len > n) {
            throw ParseError("truncated UTF-8 sequence at offset " + std::to_string(i));
        }
        for (std::size_t k = 1; k < len; ++k) {
            unsigned char bk = static_cast<unsigned char>(bytes[i + k]);
            if ((bk & 0xC0) != 0x80) {
                throw ParseError("invalid UTF-8 continuation byte at offset " +
                                 std::to_string(i + k));
            }
            cp = (cp << 6) | (bk & 0x3F);
        }
        // Reject overlong forms and surrogate code points.
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
            throw ParseError("invalid UTF-8 encoding at offset " + std::to_string(i));
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string utf8_encode(std::u32string_view cps) {
    std::string out;
    out.reserve(cps.size() * 2);
    for (char32_t cp : cps) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

std::size_t codepoint_count(std::string_view bytes) {
    return utf8_decode(bytes).size();
}

std::string codepoint_substr(std::string_view bytes, std::size_t from, std::size_t to) {
    std::u32string cps = utf8_decode(bytes);
    from = std::min(from, cps.size());
    to = std::min(to, cps.size());
    if (from >= to) return {};
    return utf8_encode(std::u32string_view(cps).substr(from, to - from));
}

std::string nfc(std::string_view bytes) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status) || norm == nullptr) {
        throw Error("ICU NFC normalizer unavailable");
    }
    icu::UnicodeString in = icu::UnicodeString::fromUTF8(
        icu::StringPiece(bytes.data(), static_cast<int32_t>(bytes.size())));
    icu::UnicodeString normalized = norm->normalize(in, status);
    if (U_FAILURE(status)) {
        throw ParseError("NFC normalization failed (invalid text)");
    }
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

bool is_space_cp(char32_t cp) {
    // Covers Unicode whitespace plus the ASCII controls tab/newline/CR.
    return u_isUWhiteSpace(static_cast<UChar32>(cp)) || cp == U'\t' || cp == U'\n' ||
           cp == U'\r';
}

bool is_punct_cp(char32_t cp) {
    if (u_ispunct(static_cast<UChar32>(cp))) return true;
    // BERT-style tokenization also isolates ASCII symbol characters ($, +, <, =, >, ^, `, |, ~).
    return (cp >= 33 && cp <= 47) || (cp >= 58 && cp <= 64) || (cp >= 91 && cp <= 96) ||
           (cp >= 123 && cp <= 126);
}

}  // namespace absa
