#pragma once

// Minimal UTF-8 utilities. Invalid sequences decode to U+FFFD so every input,
// however malformed, yields a well-defined code point sequence.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace catrag::text {

inline constexpr char32_t kReplacement = 0xFFFD;

struct CodePoint {
  char32_t value;
  std::size_t byte_offset;  // offset of the first byte in the source string
  std::size_t byte_length;
};

std::vector<CodePoint> decode(std::string_view utf8);
void append_utf8(std::string& out, char32_t cp);

char32_t to_lower(char32_t cp) noexcept;
bool is_space(char32_t cp) noexcept;
bool is_punct(char32_t cp) noexcept;
bool is_upper(char32_t cp) noexcept;
/// Letters, digits and anything else that is neither space nor punctuation.
inline bool is_word(char32_t cp) noexcept { return !is_space(cp) && !is_punct(cp); }

std::string lowercase(std::string_view utf8);

/// Splits on Unicode whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view utf8);

/// Lowercases and collapses runs of whitespace to one ASCII space, trimming
/// both ends.
std::string canonicalize(std::string_view utf8);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace catrag::text
