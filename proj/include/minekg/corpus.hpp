#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace minekg::corpus {

struct Document {
  std::string doc_id;
  std::string title;
  std::string body;  // UTF-8, blank lines separate paragraphs
  std::size_t page_count = 0;
};

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  std::size_t ordinal = 0;
  std::string text;
  std::size_t word_count = 0;

  bool operator==(const Chunk&) const = default;
};

struct CorpusStats {
  std::size_t pages = 0;
  std::size_t chars = 0;
  std::size_t words = 0;
  std::size_t sentences = 0;
  std::size_t numerics = 0;

  CorpusStats& operator+=(const CorpusStats& other);
  friend CorpusStats operator+(CorpusStats a, const CorpusStats& b) { return a += b; }
  bool operator==(const CorpusStats&) const = default;
};

struct ChunkingOptions {
  std::size_t max_words = 150;
  std::size_t min_words = 80;
};

/// Splits a document into paragraph chunks.
///
/// Paragraphs are the blank-line separated blocks of the body. A paragraph
/// longer than max_words is broken at sentence boundaries, and a sentence
/// longer than max_words is cut into near-equal windows of at most max_words.
/// The resulting units are then packed greedily in order: a unit joins the open
/// chunk while that chunk holds fewer than min_words words and the union stays
/// within max_words. A short final chunk is folded into its predecessor when
/// the result still fits.
///
/// Units from the same paragraph are joined with a space, units from different
/// paragraphs with a blank line, so the word sequence of the body is kept.
std::vector<Chunk> chunk_document(const Document& doc, const ChunkingOptions& options = {});

/// Chunk ids are "<doc_id>#<ordinal>", ordinal zero-padded to four digits.
std::string make_chunk_id(const std::string& doc_id, std::size_t ordinal);

CorpusStats document_stats(const Document& doc);
CorpusStats corpus_stats(const std::vector<Document>& corpus);

/// Reads a tab-separated manifest with the header
///   doc_id <TAB> title <TAB> page_count <TAB> file
/// where file is relative to the manifest. '#' lines are comments.
/// Duplicate doc_ids and empty bodies with page_count > 0 are rejected.
std::vector<Document> load_corpus(const std::filesystem::path& manifest);

nlohmann::json to_json(const Chunk& chunk);
Chunk chunk_from_json(const nlohmann::json& row);
nlohmann::json to_json(const CorpusStats& stats);

}  // namespace minekg::corpus
