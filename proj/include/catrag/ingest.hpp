#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace catrag {

struct Document {
  std::string doc_id;
  std::string source;
  std::string text;
};

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  std::size_t seq = 0;
  std::string text;       // verbatim slice of the document
  std::string norm_text;  // lowercased, expanded, stopword-free
  // Half-open window in code points.
  std::size_t char_begin = 0;
  std::size_t char_end = 0;
};

/// Abbreviation → expansion, matched longest-first on word boundaries.
class AbbreviationDictionary {
 public:
  AbbreviationDictionary() = default;
  /// Keys and expansions are lowercased; a key equal to its expansion is
  /// rejected with InvalidDictionary.
  explicit AbbreviationDictionary(const std::map<std::string, std::string>& entries);

  static AbbreviationDictionary load(const std::filesystem::path& path);

  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::string, std::string> entries_;
};

using Stopwords = std::set<std::string>;

Stopwords load_stopwords(const std::filesystem::path& path);

/// Loads a directory of .txt/.md files or a single .jsonl file of
/// {"doc_id", "text"} records. Result is ordered by doc_id.
std::vector<Document> load_corpus(const std::filesystem::path& path);

std::string normalize(std::string_view text, const AbbreviationDictionary& dict,
                      const Stopwords& stopwords);

struct ChunkOptions {
  std::size_t size = 1000;
  std::size_t overlap = 200;
  bool snap_to_whitespace = true;
};

/// Deterministic digest of (doc_id, seq).
std::string make_chunk_id(std::string_view doc_id, std::size_t seq);

std::vector<Chunk> chunk_document(const Document& doc, const ChunkOptions& options,
                                  const AbbreviationDictionary& dict = {},
                                  const Stopwords& stopwords = {});

}  // namespace catrag
