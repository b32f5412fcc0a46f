#include "minekg/text.hpp"

#include <array>
#include <cctype>

namespace minekg::text {
namespace {

constexpr std::array<std::string_view, 47> kAbbreviations = {
    "al",   "approx", "apr",  "aug", "cf",   "co",   "corp", "dec", "dept", "dr",
    "e.g",  "est",    "etc",  "feb", "fig",  "figs", "gen",  "gov", "govt", "i.e",
    "inc",  "jan",    "jr",   "jul", "jun",  "km",   "ltd",  "mar", "mr",   "mrs",
    "ms",   "mt",     "no",   "nos", "nov",  "oct",  "pp",   "prof", "sep", "sept",
    "sq",   "sr",     "st",   "u.n", "u.s",  "vol",  "vs"};

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']' || c == '}'; }
bool is_opener(char c) { return c == '"' || c == '\'' || c == '(' || c == '[' || c == '{'; }
bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view strip_closers(std::string_view t) {
  while (!t.empty() && is_closer(t.back())) t.remove_suffix(1);
  return t;
}

std::string_view strip_openers(std::string_view t) {
  while (!t.empty() && is_opener(t.front())) t.remove_prefix(1);
  return t;
}

bool closes_sentence(std::string_view token, const std::string_view* next) {
  std::string_view core = strip_closers(strip_openers(token));
  if (core.empty()) return false;
  const char last = core.back();
  if (last != '.' && last != '!' && last != '?') return false;
  if (next != nullptr) {
    std::string_view n = strip_openers(*next);
    if (n.empty()) return false;
    const char c = n.front();
    if (!((c >= 'A' && c <= 'Z') || is_digit(c))) return false;
  }
  if (last == '.') {
    std::string_view word = core;
    word.remove_suffix(1);
    if (word.size() == 1 && is_ascii_alpha(word.front())) return false;
    if (is_abbreviation(word)) return false;
  }
  return true;
}

// --- stemmer -------------------------------------------------------------

bool is_consonant(const std::string& w, std::size_t i) {
  switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
      return false;
    case 'y':
      return i == 0 ? true : !is_consonant(w, i - 1);
    default:
      return true;
  }
}

// Porter's m: number of VC sequences in w[0, len).
int measure(const std::string& w, std::size_t len) {
  int m = 0;
  std::size_t i = 0;
  while (i < len && is_consonant(w, i)) ++i;
  while (i < len) {
    while (i < len && !is_consonant(w, i)) ++i;
    if (i >= len) break;
    while (i < len && is_consonant(w, i)) ++i;
    ++m;
  }
  return m;
}

bool has_vowel(const std::string& w, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i)
    if (!is_consonant(w, i)) return true;
  return false;
}

bool ends_with(const std::string& w, std::string_view suffix) {
  return w.size() >= suffix.size() &&
         std::string_view(w).substr(w.size() - suffix.size()) == suffix;
}

bool double_consonant_end(const std::string& w) {
  const std::size_t n = w.size();
  return n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1);
}

// *o: stem ends cvc where the final c is not w, x or y.
bool cvc_end(const std::string& w, std::size_t len) {
  if (len < 3) return false;
  if (!is_consonant(w, len - 1) || is_consonant(w, len - 2) || !is_consonant(w, len - 3))
    return false;
  const char c = w[len - 1];
  return c != 'w' && c != 'x' && c != 'y';
}

void step1a(std::string& w) {
  if (ends_with(w, "sses")) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "ies")) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "ss")) {
    // unchanged
  } else if (ends_with(w, "s")) {
    w.pop_back();
  }
}

void step1b(std::string& w) {
  if (ends_with(w, "eed")) {
    if (measure(w, w.size() - 3) > 0) w.pop_back();
    return;
  }
  std::size_t cut = 0;
  if (ends_with(w, "ed") && has_vowel(w, w.size() - 2)) {
    cut = 2;
  } else if (ends_with(w, "ing") && has_vowel(w, w.size() - 3)) {
    cut = 3;
  } else {
    return;
  }
  w.resize(w.size() - cut);
  if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
    w.push_back('e');
  } else if (double_consonant_end(w)) {
    const char c = w.back();
    if (c != 'l' && c != 's' && c != 'z') w.pop_back();
  } else if (measure(w, w.size()) == 1 && cvc_end(w, w.size())) {
    w.push_back('e');
  }
}

void step1c(std::string& w) {
  if (ends_with(w, "y") && has_vowel(w, w.size() - 1)) w.back() = 'i';
}

void step5(std::string& w) {
  if (ends_with(w, "e") && measure(w, w.size() - 1) > 1) w.pop_back();
  if (measure(w, w.size()) > 1 && ends_with(w, "ll")) w.pop_back();
}

std::string stem_once(std::string w) {
  if (w.size() <= 2) return w;
  step1a(w);
  step1b(w);
  step1c(w);
  step5(w);
  return w;
}

}  // namespace

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) tokens.push_back({s.substr(start, i - start), start});
  }
  return tokens;
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> words;
  for (const Token& t : tokenize(s)) words.push_back(t.text);
  return words;
}

std::size_t count_words(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::size_t count_code_points(std::string_view s) noexcept {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

std::vector<std::string_view> split_paragraphs(std::string_view s) {
  std::vector<std::string_view> paragraphs;
  std::size_t para_start = std::string_view::npos;
  std::size_t para_end = 0;
  std::size_t pos = 0;
  auto flush = [&] {
    if (para_start != std::string_view::npos) {
      std::string_view p = trim(s.substr(para_start, para_end - para_start));
      if (!p.empty()) paragraphs.push_back(p);
      para_start = std::string_view::npos;
    }
  };
  while (pos <= s.size()) {
    std::size_t eol = s.find('\n', pos);
    if (eol == std::string_view::npos) eol = s.size();
    const std::string_view line = s.substr(pos, eol - pos);
    if (trim(line).empty()) {
      flush();
    } else {
      if (para_start == std::string_view::npos) para_start = pos;
      para_end = eol;
    }
    pos = eol + 1;
  }
  flush();
  return paragraphs;
}

std::span<const std::string_view> abbreviation_stop_list() noexcept { return kAbbreviations; }

bool is_abbreviation(std::string_view token_core) {
  const std::string lower = to_lower_ascii(token_core);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) != kAbbreviations.end();
}

std::vector<std::string_view> split_sentences(std::string_view s) {
  const std::vector<Token> tokens = tokenize(s);
  std::vector<std::string_view> sentences;
  std::size_t first = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool last = i + 1 == tokens.size();
    const std::string_view* next = last ? nullptr : &tokens[i + 1].text;
    if (last || closes_sentence(tokens[i].text, next)) {
      const std::size_t begin = tokens[first].offset;
      const std::size_t end = tokens[i].offset + tokens[i].text.size();
      sentences.push_back(s.substr(begin, end - begin));
      first = i + 1;
    }
  }
  return sentences;
}

std::size_t count_sentences(std::string_view s) { return split_sentences(s).size(); }

bool is_numeric_token(std::string_view token) {
  auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (!token.empty() && is_punct(token.front())) token.remove_prefix(1);
  while (!token.empty() && is_punct(token.back())) token.remove_suffix(1);
  return std::any_of(token.begin(), token.end(), is_digit);
}

std::string stem(std::string_view word) {
  for (char c : word)
    if (c < 'a' || c > 'z') return std::string(word);
  std::string current(word);
  for (int guard = 0; guard < 32; ++guard) {
    std::string next = stem_once(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::string join(std::span<const std::string_view> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace minekg::text
