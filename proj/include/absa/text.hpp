#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace absa {

// UTF-8 <-> code point helpers. Corpus offsets are code-point offsets, so substring
// and length work on decoded text. Decoding throws ParseError on invalid UTF-8.
std::u32string utf8_decode(std::string_view bytes);
std::string utf8_encode(std::u32string_view cps);
std::size_t codepoint_count(std::string_view bytes);

// Substring [from, to) in code points; out-of-range indexes clamp to the text length.
std::string codepoint_substr(std::string_view bytes, std::size_t from, std::size_t to);

// Unicode NFC. The single text transformation the pipeline applies anywhere.
std::string nfc(std::string_view bytes);

bool is_space_cp(char32_t cp);
bool is_punct_cp(char32_t cp);

}  // namespace absa
