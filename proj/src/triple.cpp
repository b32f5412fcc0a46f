#include "minekg/triple.hpp"

#include <algorithm>

#include "minekg/error.hpp"
#include "minekg/text.hpp"

namespace minekg::triples {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_ident(char c) { return is_ident_start(c) || is_digit(c); }

// Length of a UTF-8 punctuation sequence we treat like ASCII punctuation:
// curly quotes, en/em dash, ellipsis and no-break space. 0 when not one.
std::size_t unicode_punct_length(std::string_view s, std::size_t i) {
  const auto b = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  if (i + 1 < s.size() && b(i) == 0xC2 && b(i + 1) == 0xA0) return 2;
  if (i + 2 < s.size() && b(i) == 0xE2 && b(i + 1) == 0x80) {
    const unsigned char c = b(i + 2);
    if ((c >= 0x98 && c <= 0x9D) || c == 0x93 || c == 0x94 || c == 0xA6) return 3;
  }
  return 0;
}

}  // namespace

std::vector<std::string> normalized_tokens(std::string_view s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const char c = s[i];
    if (const std::size_t n = unicode_punct_length(s, i); n > 0) {
      cleaned.push_back(' ');
      i += n;
      continue;
    }
    if (static_cast<unsigned char>(c) >= 0x80 || is_alnum(c)) {
      cleaned.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    } else if ((c == ',' || c == '.') && i > 0 && i + 1 < s.size() && is_digit(s[i - 1]) &&
               is_digit(s[i + 1])) {
      cleaned.push_back(c);
    } else {
      cleaned.push_back(' ');
    }
    ++i;
  }
  std::vector<std::string> tokens;
  for (std::string_view word : text::split_words(cleaned)) tokens.push_back(text::stem(word));
  return tokens;
}

std::string normalize_text(std::string_view s) {
  const std::vector<std::string> tokens = normalized_tokens(s);
  return text::join(tokens, " ");
}

TripleKey identity(const Triple& t) {
  return {text::to_lower_ascii(text::trim(t.relation)), normalize_text(t.subject),
          normalize_text(t.object)};
}

bool TripleSet::add(Triple t) {
  if (contains(t)) return false;
  triples.push_back(std::move(t));
  return true;
}

bool TripleSet::contains(const Triple& t) const {
  const TripleKey key = identity(t);
  return std::any_of(triples.begin(), triples.end(),
                     [&](const Triple& existing) { return identity(existing) == key; });
}

std::optional<Triple> parse_line(std::string_view line) {
  line = text::trim(line);
  std::size_t i = 0;
  if (line.empty() || !is_ident_start(line[0])) return std::nullopt;
  while (i < line.size() && is_ident(line[i])) ++i;
  const std::string_view relation = line.substr(0, i);
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  if (i >= line.size() || line[i] != '(' || line.back() != ')') return std::nullopt;

  const std::string_view args = line.substr(i + 1, line.size() - i - 2);
  int depth = 0;
  std::size_t split = std::string_view::npos;
  for (std::size_t k = 0; k < args.size(); ++k) {
    const char c = args[k];
    if (c == '(') {
      ++depth;
    } else if (c == ')') {
      if (--depth < 0) return std::nullopt;
    } else if (c == ',' && depth == 0 && split == std::string_view::npos) {
      const bool digit_flanked =
          k > 0 && k + 1 < args.size() && is_digit(args[k - 1]) && is_digit(args[k + 1]);
      if (!digit_flanked) split = k;
    }
  }
  if (depth != 0 || split == std::string_view::npos) return std::nullopt;

  const std::string_view subject = text::trim(args.substr(0, split));
  const std::string_view object = text::trim(args.substr(split + 1));
  if (subject.empty() || object.empty()) return std::nullopt;
  return Triple{std::string(relation), std::string(subject), std::string(object),
                std::string(line)};
}

TripleSet parse_output(std::string_view raw, std::string prompt_id) {
  TripleSet ts;
  ts.prompt_id = std::move(prompt_id);
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    std::size_t eol = raw.find('\n', pos);
    if (eol == std::string_view::npos) eol = raw.size();
    const std::string_view line = text::trim(raw.substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty()) continue;
    if (std::optional<Triple> t = parse_line(line)) {
      if (!ts.add(std::move(*t))) ++ts.duplicate_lines;
    } else {
      ts.nonconforming_lines.emplace_back(line);
    }
  }
  return ts;
}

std::string render(const Triple& t) {
  std::string out;
  out.reserve(t.relation.size() + t.subject.size() + t.object.size() + 4);
  out += t.relation;
  out += '(';
  out += t.subject;
  out += ", ";
  out += t.object;
  out += ')';
  return out;
}

std::string canonical_serialize(const TripleSet& ts) {
  std::vector<std::string> lines;
  lines.reserve(ts.triples.size());
  for (const Triple& t : ts.triples) lines.push_back(render(t));
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
  return text::join(lines, "\n");
}

std::vector<nlohmann::json> to_rows(const TripleSet& ts) {
  std::vector<nlohmann::json> rows;
  rows.reserve(ts.triples.size());
  for (const Triple& t : ts.triples) {
    rows.push_back({{"prompt_id", ts.prompt_id},
                    {"relation", t.relation},
                    {"subject", t.subject},
                    {"object", t.object},
                    {"raw_line", t.raw_line.empty() ? render(t) : t.raw_line}});
  }
  return rows;
}

std::map<std::string, TripleSet> group_rows(const std::vector<nlohmann::json>& rows) {
  std::map<std::string, TripleSet> sets;
  for (const nlohmann::json& row : rows) {
    try {
      const std::string prompt_id = row.at("prompt_id").get<std::string>();
      TripleSet& ts = sets[prompt_id];
      ts.prompt_id = prompt_id;
      Triple t{row.at("relation").get<std::string>(), row.at("subject").get<std::string>(),
               row.at("object").get<std::string>(), row.value("raw_line", std::string{})};
      if (text::trim(t.relation).empty() || text::trim(t.subject).empty() ||
          text::trim(t.object).empty())
        throw Error(Errc::MalformedFile, "triple row with an empty field for " + prompt_id);
      if (t.raw_line.empty()) t.raw_line = render(t);
      if (!ts.add(std::move(t))) ++ts.duplicate_lines;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::MalformedFile, std::string("triple row: ") + e.what());
    }
  }
  return sets;
}

}  // namespace minekg::triples
