// text.h: the single text normal form shared by user data and transfer data.
//
// Normal form: angle-bracketed non-verbal markers ("<laugh>") removed, ASCII
// lowercased, punctuation other than apostrophes replaced by whitespace, and
// whitespace collapsed to single spaces with no leading or trailing space.

#ifndef MIDAS_TEXT_H_
#define MIDAS_TEXT_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace midas {

std::string normalize_text(std::string_view raw);

// Splits on runs of ASCII whitespace.
std::vector<std::string> split_tokens(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t begin,
                        std::size_t end, std::string_view sep = " ");
std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep = " ");

// Lowercases and maps runs of spaces, hyphens, slashes and underscores to a
// single underscore: "yes/no question" -> "yes_no_question".
std::string slugify(std::string_view name);

// Literal marker for a sentence break in raw text.
inline constexpr std::string_view kBoundaryMarker = "[SEG]";

// Splits raw text into sentences at '.', '!', '?' and the boundary marker, then
// normalizes each sentence. Sentences that normalize to nothing are dropped.
std::vector<std::vector<std::string>> split_sentences(std::string_view raw);

// 64-bit FNV-1a, rendered as 16 lowercase hex digits by hash_hex().
std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::string_view bytes);

}  // namespace midas

#endif  // MIDAS_TEXT_H_
