#pragma once
// UTF-8 codepoint utilities: decoding, width/case folding, CJK detection,
// NFC normalization (ICU-backed).

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace aed::uni {

// Lenient UTF-8 decode; invalid byte sequences become U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view text);
std::string encode_utf8(const std::vector<char32_t>& codepoints);
void append_utf8(std::string& out, char32_t cp);

// CJK Unified Ideographs, Extension A, and CJK symbols/punctuation.
bool is_cjk(char32_t cp);

bool is_ascii_digit(char32_t cp);
bool is_fullwidth_digit(char32_t cp);

// Full-width ASCII variants (U+FF01..FF5E) to their half-width forms,
// ideographic space to ASCII space. Identity otherwise.
char32_t fold_width(char32_t cp);

// Simple case folding (ASCII fast path, Unicode simple fold elsewhere).
char32_t fold_case(char32_t cp);

// Canonical composition (NFC) of a UTF-8 string.
std::string nfc(std::string_view text);

}  // namespace aed::uni
