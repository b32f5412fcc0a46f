#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace minekg::text {

struct Token {
  std::string_view text;
  std::size_t offset = 0;  // byte offset into the source
};

bool is_space(char c) noexcept;

std::string_view trim(std::string_view s) noexcept;
std::string to_lower_ascii(std::string_view s);

/// Whitespace tokens (ASCII space, tab, CR, LF, FF, VT).
std::vector<std::string_view> split_words(std::string_view s);
std::vector<Token> tokenize(std::string_view s);
std::size_t count_words(std::string_view s);

/// Number of UTF-8 code points; continuation bytes are not counted.
std::size_t count_code_points(std::string_view s) noexcept;

/// Paragraphs are separated by one or more blank (whitespace-only) lines.
/// Returned views are trimmed and never empty.
std::vector<std::string_view> split_paragraphs(std::string_view s);

// Sentence boundary rule, shared by corpus statistics and demonstration
// extraction:
//   a token closes a sentence when, after removing trailing closers
//   (" ' ) ] }), it ends in '.', '!' or '?', and either it is the last token
//   or the next token (after removing leading openers) starts with an ASCII
//   uppercase letter or a digit.
//   A '.'-terminated token whose core is a single letter (an initial) or an
//   entry of abbreviation_stop_list() never closes a sentence.
std::span<const std::string_view> abbreviation_stop_list() noexcept;
bool is_abbreviation(std::string_view token_core);

/// Sentences as views into `s`, spanning first to last token of each.
std::vector<std::string_view> split_sentences(std::string_view s);
std::size_t count_sentences(std::string_view s);

/// A token is numeric when it still contains a digit after stripping its
/// enclosing punctuation.
bool is_numeric_token(std::string_view token);

/// Inflectional suffix stripper on lowercase ASCII words: Porter steps 1a, 1b,
/// 1c and 5b, plus step 5a restricted to m > 1 (so "square" keeps its "e").
/// Applied until it reaches a fixpoint, which makes it idempotent. Words of
/// length <= 2 and tokens with any non [a-z] byte are returned unchanged.
std::string stem(std::string_view word);

/// True when `needle` occurs in `haystack` as a contiguous run. An empty
/// needle is contained everywhere.
template <typename T>
bool contains_run(std::span<const T> haystack, std::span<const T> needle) {
  if (needle.empty()) return true;
  if (needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

std::string join(std::span<const std::string> parts, std::string_view sep);
std::string join(std::span<const std::string_view> parts, std::string_view sep);

}  // namespace minekg::text
