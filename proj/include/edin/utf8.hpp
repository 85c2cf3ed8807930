#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace edin::utf8 {

// Spans throughout the toolkit are indexed over Unicode scalar values.
// These helpers map between code point indices and byte offsets of a UTF-8
// string. Malformed bytes are treated as single code points so counting
// never fails on dirty input.

inline std::size_t sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

inline std::int64_t count_codepoints(std::string_view s) {
  std::int64_t n = 0;
  for (std::size_t i = 0; i < s.size();
       i += sequence_length(static_cast<unsigned char>(s[i]))) {
    ++n;
  }
  return n;
}

// Byte offset of the code point at index cp; s.size() when past the end.
inline std::size_t byte_offset(std::string_view s, std::int64_t cp) {
  std::size_t i = 0;
  for (std::int64_t seen = 0; i < s.size() && seen < cp; ++seen) {
    i += sequence_length(static_cast<unsigned char>(s[i]));
  }
  return i;
}

inline std::string substr(std::string_view s, std::int64_t cp_start,
                          std::int64_t cp_end) {
  const std::size_t b0 = byte_offset(s, cp_start);
  const std::size_t b1 = byte_offset(s, cp_end);
  return std::string(s.substr(b0, b1 - b0));
}

// Code point at a given code point index, decoded; U+FFFD on malformed.
inline char32_t codepoint_at_byte(std::string_view s, std::size_t i) {
  const unsigned char c0 = static_cast<unsigned char>(s[i]);
  const std::size_t len = sequence_length(c0);
  if (len == 1) return c0 < 0x80 ? c0 : 0xFFFD;
  if (i + len > s.size()) return 0xFFFD;
  char32_t cp = c0 & (0x7F >> len);
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char cont = static_cast<unsigned char>(s[i + k]);
    if ((cont >> 6) != 0x2) return 0xFFFD;
    cp = (cp << 6) | (cont & 0x3F);
  }
  return cp;
}

}  // namespace edin::utf8
