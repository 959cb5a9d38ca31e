#include "atesa/unicode.hpp"

namespace atesa::unicode {
namespace {

// Decodes one code point starting at |i|. Returns its length in bytes, or 0
// for an invalid sequence.
std::size_t decode_one(std::string_view s, std::size_t i, char32_t& out) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    out = b0;
    return 1;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  // Overlong forms, surrogates, out of range.
  if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
      (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
      (cp >= 0xD800 && cp <= 0xDFFF)) {
    return 0;
  }
  out = cp;
  return len;
}

}  // namespace

Utf8Text::Utf8Text(std::string_view text) : text_(text) {
  code_points_.reserve(text.size());
  byte_offsets_.reserve(text.size() + 1);
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = 0;
    std::size_t len = decode_one(text, i, cp);
    if (len == 0) {
      cp = 0xFFFD;
      len = 1;
    }
    byte_offsets_.push_back(i);
    code_points_.push_back(cp);
    i += len;
  }
  byte_offsets_.push_back(text.size());
}

std::string_view Utf8Text::slice(std::size_t begin, std::size_t end) const {
  const std::size_t b = byte_offsets_[begin];
  const std::size_t e = byte_offsets_[end];
  return text_.substr(b, e - b);
}

bool is_valid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  while (i < bytes.size()) {
    char32_t cp = 0;
    const std::size_t len = decode_one(bytes, i, cp);
    if (len == 0) return false;
    i += len;
  }
  return true;
}

std::size_t code_point_length(std::string_view text) {
  return Utf8Text(text).size();
}

bool is_space(char32_t c) {
  switch (c) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case U'\f':
    case U'\v':
    case 0x85:
    case 0xA0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
    case 0xFEFF:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200B;
  }
}

bool is_word_char(char32_t c) {
  if (c < 0x80) {
    return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') ||
           (c >= U'0' && c <= U'9') || c == U'_';
  }
  if (is_space(c)) return false;
  // Latin-1 punctuation and symbols.
  if (c >= 0xA1 && c <= 0xBF && c != 0xAA && c != 0xB5 && c != 0xBA) {
    return false;
  }
  if (c == 0xD7 || c == 0xF7) return false;
  // General punctuation, currency, arrows, math, box drawing, CJK punctuation.
  if ((c >= 0x2000 && c <= 0x2BFF) || (c >= 0x3000 && c <= 0x303F) ||
      (c >= 0xFE30 && c <= 0xFE4F) || (c >= 0xFF00 && c <= 0xFF0F)) {
    return false;
  }
  return c != 0xFFFD;
}

}  // namespace atesa::unicode
