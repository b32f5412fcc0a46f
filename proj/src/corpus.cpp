#include "minekg/corpus.hpp"

#include <charconv>
#include <cstdio>
#include <set>

#include "minekg/error.hpp"
#include "minekg/io.hpp"
#include "minekg/text.hpp"

namespace minekg::corpus {
namespace {

struct Unit {
  std::string text;
  std::size_t words = 0;
  std::size_t paragraph = 0;
};

void push_long_sentence(std::string_view sentence, std::size_t max_words, std::size_t paragraph,
                        std::vector<Unit>& units) {
  const std::vector<std::string_view> words = text::split_words(sentence);
  const std::size_t pieces = (words.size() + max_words - 1) / max_words;
  const std::size_t base = words.size() / pieces;
  const std::size_t extra = words.size() % pieces;
  std::size_t next = 0;
  for (std::size_t p = 0; p < pieces; ++p) {
    const std::size_t take = base + (p < extra ? 1 : 0);
    std::span<const std::string_view> window(words.data() + next, take);
    units.push_back({text::join(window, " "), take, paragraph});
    next += take;
  }
}

std::vector<Unit> make_units(std::string_view body, std::size_t max_words) {
  std::vector<Unit> units;
  const std::vector<std::string_view> paragraphs = text::split_paragraphs(body);
  for (std::size_t p = 0; p < paragraphs.size(); ++p) {
    const std::size_t words = text::count_words(paragraphs[p]);
    if (words <= max_words) {
      units.push_back({std::string(paragraphs[p]), words, p});
      continue;
    }
    for (std::string_view sentence : text::split_sentences(paragraphs[p])) {
      const std::size_t sw = text::count_words(sentence);
      if (sw <= max_words) {
        units.push_back({std::string(sentence), sw, p});
      } else {
        push_long_sentence(sentence, max_words, p, units);
      }
    }
  }
  return units;
}

struct OpenChunk {
  std::string text;
  std::size_t words = 0;
  std::size_t last_paragraph = 0;

  void append(const Unit& u) {
    if (words > 0) text += (u.paragraph == last_paragraph) ? " " : "\n\n";
    text += u.text;
    words += u.words;
    last_paragraph = u.paragraph;
  }
};

}  // namespace

CorpusStats& CorpusStats::operator+=(const CorpusStats& other) {
  pages += other.pages;
  chars += other.chars;
  words += other.words;
  sentences += other.sentences;
  numerics += other.numerics;
  return *this;
}

std::string make_chunk_id(const std::string& doc_id, std::size_t ordinal) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "#%04zu", ordinal);
  return doc_id + buf;
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingOptions& options) {
  if (options.min_words < 1 || options.min_words > options.max_words)
    throw Error(Errc::InvalidArgument, "chunking requires 1 <= min_words <= max_words");

  std::vector<OpenChunk> packed;
  for (const Unit& unit : make_units(doc.body, options.max_words)) {
    if (!packed.empty() && packed.back().words < options.min_words &&
        packed.back().words + unit.words <= options.max_words) {
      packed.back().append(unit);
    } else {
      packed.emplace_back().append(unit);
    }
  }
  if (packed.size() >= 2) {
    OpenChunk& tail = packed.back();
    OpenChunk& prev = packed[packed.size() - 2];
    if (tail.words < options.min_words && prev.words + tail.words <= options.max_words) {
      prev.text += (prev.last_paragraph == tail.last_paragraph) ? " " : "\n\n";
      prev.text += tail.text;
      prev.words += tail.words;
      prev.last_paragraph = tail.last_paragraph;
      packed.pop_back();
    }
  }

  std::vector<Chunk> chunks;
  chunks.reserve(packed.size());
  for (std::size_t i = 0; i < packed.size(); ++i) {
    chunks.push_back(Chunk{make_chunk_id(doc.doc_id, i), doc.doc_id, i,
                           std::move(packed[i].text), packed[i].words});
  }
  return chunks;
}

CorpusStats document_stats(const Document& doc) {
  CorpusStats stats;
  stats.pages = doc.page_count;
  stats.chars = text::count_code_points(doc.body);
  for (std::string_view word : text::split_words(doc.body)) {
    ++stats.words;
    if (text::is_numeric_token(word)) ++stats.numerics;
  }
  // a paragraph break always closes a sentence
  for (std::string_view paragraph : text::split_paragraphs(doc.body))
    stats.sentences += text::count_sentences(paragraph);
  return stats;
}

CorpusStats corpus_stats(const std::vector<Document>& corpus) {
  CorpusStats total;
  for (const Document& doc : corpus) total += document_stats(doc);
  return total;
}

std::vector<Document> load_corpus(const std::filesystem::path& manifest) {
  const std::string content = io::read_file(manifest);
  const std::filesystem::path base = manifest.parent_path();
  std::vector<Document> docs;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) eol = content.size();
    std::string_view line(content.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty() || line.front() == '#') continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    if (fields.size() != 4)
      throw Error(Errc::MalformedFile, where + ": expected 4 tab-separated fields");
    if (text::trim(fields[0]) == "doc_id") continue;

    Document doc;
    doc.doc_id = std::string(text::trim(fields[0]));
    doc.title = std::string(text::trim(fields[1]));
    const std::string_view pages = text::trim(fields[2]);
    auto [ptr, ec] = std::from_chars(pages.data(), pages.data() + pages.size(), doc.page_count);
    if (ec != std::errc{} || ptr != pages.data() + pages.size())
      throw Error(Errc::MalformedFile, where + ": page_count must be a non-negative integer");
    if (doc.doc_id.empty()) throw Error(Errc::MalformedFile, where + ": empty doc_id");
    if (!seen.insert(doc.doc_id).second)
      throw Error(Errc::InvalidDocument, where + ": duplicate doc_id " + doc.doc_id);
    doc.body = io::read_file(base / std::string(text::trim(fields[3])));
    if (text::trim(doc.body).empty() && doc.page_count > 0)
      throw Error(Errc::InvalidDocument, where + ": empty body for " + doc.doc_id);
    docs.push_back(std::move(doc));
  }
  return docs;
}

nlohmann::json to_json(const Chunk& chunk) {
  return {{"chunk_id", chunk.chunk_id},
          {"doc_id", chunk.doc_id},
          {"ordinal", chunk.ordinal},
          {"text", chunk.text},
          {"word_count", chunk.word_count}};
}

Chunk chunk_from_json(const nlohmann::json& row) {
  try {
    return Chunk{row.at("chunk_id").get<std::string>(), row.at("doc_id").get<std::string>(),
                 row.at("ordinal").get<std::size_t>(), row.at("text").get<std::string>(),
                 row.at("word_count").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedFile, std::string("chunk row: ") + e.what());
  }
}

nlohmann::json to_json(const CorpusStats& stats) {
  return {{"pages", stats.pages},
          {"chars", stats.chars},
          {"words", stats.words},
          {"sentences", stats.sentences},
          {"numerics", stats.numerics}};
}

}  // namespace minekg::corpus
