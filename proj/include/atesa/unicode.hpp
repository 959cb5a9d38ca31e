#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace atesa::unicode {

// A decoded UTF-8 string that remembers where each code point starts, so
// code-point offsets (what the corpora use) can be mapped back to bytes.
// Invalid bytes decode to U+FFFD, one code point per byte.
class Utf8Text {
 public:
  explicit Utf8Text(std::string_view text);

  std::size_t size() const { return code_points_.size(); }
  char32_t operator[](std::size_t i) const { return code_points_[i]; }

  // Bytes of the code points [begin, end).
  std::string_view slice(std::size_t begin, std::size_t end) const;

 private:
  std::string_view text_;
  std::vector<char32_t> code_points_;
  std::vector<std::size_t> byte_offsets_;  // size() + 1 entries
};

bool is_valid_utf8(std::string_view bytes);

std::size_t code_point_length(std::string_view text);

bool is_space(char32_t c);
bool is_word_char(char32_t c);

}  // namespace atesa::unicode
