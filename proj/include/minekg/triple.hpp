#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"

namespace minekg::triples {

struct Triple {
  std::string relation;
  std::string subject;
  std::string object;
  std::string raw_line;  // provenance; not part of equality

  friend bool operator==(const Triple& a, const Triple& b) {
    return a.relation == b.relation && a.subject == b.subject && a.object == b.object;
  }
};

/// Identity used for de-duplication: relation lowercased, subject and object
/// passed through normalize_text().
struct TripleKey {
  std::string relation;
  std::string subject;
  std::string object;

  auto operator<=>(const TripleKey&) const = default;
};

TripleKey identity(const Triple& t);

struct TripleSet {
  std::string prompt_id;
  std::vector<Triple> triples;                  // first occurrence order
  std::vector<std::string> nonconforming_lines;
  std::size_t duplicate_lines = 0;              // well-formed lines collapsed into an earlier triple

  std::size_t accepted_lines() const { return triples.size() + duplicate_lines; }
  std::size_t candidate_lines() const { return accepted_lines() + nonconforming_lines.size(); }

  /// Appends unless an equal identity is already present.
  bool add(Triple t);
  bool contains(const Triple& t) const;
};

/// Lowercases ASCII, replaces punctuation with spaces (a ',' or '.' between
/// two digits is kept, so "2,500,011" survives), stems every token with
/// text::stem and joins tokens with single spaces. Idempotent.
std::string normalize_text(std::string_view s);
std::vector<std::string> normalized_tokens(std::string_view s);

/// Grammar for one line:  relation '(' subject ',' object ')'
///   relation  [A-Za-z_][A-Za-z0-9_]*, optional spaces before '('
///   The argument list must be parenthesis-balanced. It is split at the first
///   comma that sits at depth 0 and is not flanked by digits on both sides.
///   Both arguments must be non-empty after trimming.
std::optional<Triple> parse_line(std::string_view line);

/// Every non-blank line is a candidate. Well-formed lines become triples
/// (later duplicates are counted, not stored); the rest are nonconforming.
TripleSet parse_output(std::string_view raw, std::string prompt_id = {});

/// "relation(subject, object)"
std::string render(const Triple& t);

/// Rendered triples, de-duplicated, sorted bytewise and joined with '\n'.
std::string canonical_serialize(const TripleSet& ts);

// JSONL rows: {prompt_id, relation, subject, object, raw_line}
std::vector<nlohmann::json> to_rows(const TripleSet& ts);
/// Groups rows by prompt_id, preserving row order within each prompt.
std::map<std::string, TripleSet> group_rows(const std::vector<nlohmann::json>& rows);

}  // namespace minekg::triples
