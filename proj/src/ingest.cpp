#include "catrag/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "catrag/error.hpp"
#include "catrag/hash.hpp"
#include "catrag/text.hpp"

namespace catrag {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  return ss.str();
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

AbbreviationDictionary::AbbreviationDictionary(
    const std::map<std::string, std::string>& entries) {
  for (const auto& [key, expansion] : entries) {
    auto k = text::canonicalize(key);
    auto v = text::canonicalize(expansion);
    if (k.empty()) throw Error(ErrorCode::InvalidDictionary, "empty abbreviation key");
    if (k == v) {
      throw Error(ErrorCode::InvalidDictionary, "abbreviation '" + k + "' expands to itself");
    }
    entries_[std::move(k)] = std::move(v);
  }
}

AbbreviationDictionary AbbreviationDictionary::load(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidDictionary, path.string() + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::InvalidDictionary, path.string() + ": expected a JSON object");
  }
  std::map<std::string, std::string> entries;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_string()) {
      throw Error(ErrorCode::InvalidDictionary, path.string() + ": value of '" + key + "' is not a string");
    }
    entries[key] = value.get<std::string>();
  }
  return AbbreviationDictionary(entries);
}

Stopwords load_stopwords(const fs::path& path) {
  std::istringstream in(read_file(path));
  Stopwords out;
  std::string line;
  while (std::getline(in, line)) {
    auto word = text::canonicalize(line);
    if (!word.empty()) out.insert(std::move(word));
  }
  return out;
}

std::vector<Document> load_corpus(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error(ErrorCode::IoError, "no such path: " + path.string());

  std::vector<Document> docs;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (!entry.is_regular_file()) continue;
      const auto ext = entry.path().extension().string();
      if (ext != ".txt" && ext != ".md") continue;
      Document doc{entry.path().stem().string(), entry.path().string(), read_file(entry.path())};
      if (blank(doc.text)) throw Error(ErrorCode::EmptyDocument, "empty document: " + doc.source);
      docs.push_back(std::move(doc));
    }
  } else if (path.extension() == ".jsonl") {
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (blank(line)) continue;
      const auto where = path.string() + ":" + std::to_string(lineno);
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::IoError, where + ": " + e.what());
      }
      if (!rec.is_object() || !rec.contains("doc_id") || !rec.contains("text") ||
          !rec["doc_id"].is_string() || !rec["text"].is_string()) {
        throw Error(ErrorCode::IoError, where + ": expected {\"doc_id\", \"text\"} strings");
      }
      Document doc{rec["doc_id"].get<std::string>(), where, rec["text"].get<std::string>()};
      if (doc.doc_id.empty()) throw Error(ErrorCode::IoError, where + ": empty doc_id");
      if (blank(doc.text)) throw Error(ErrorCode::EmptyDocument, where + ": empty text");
      docs.push_back(std::move(doc));
    }
  } else {
    Document doc{path.stem().string(), path.string(), read_file(path)};
    if (blank(doc.text)) throw Error(ErrorCode::EmptyDocument, "empty document: " + doc.source);
    docs.push_back(std::move(doc));
  }

  if (docs.empty()) throw Error(ErrorCode::EmptyCorpus, "no documents under " + path.string());
  std::sort(docs.begin(), docs.end(),
            [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
  for (std::size_t i = 1; i < docs.size(); ++i) {
    if (docs[i].doc_id == docs[i - 1].doc_id) {
      throw Error(ErrorCode::DuplicateDocument, "duplicate doc_id '" + docs[i].doc_id + "'");
    }
  }
  return docs;
}

std::string normalize(std::string_view raw, const AbbreviationDictionary& dict,
                      const Stopwords& stopwords) {
  const std::string lowered = text::lowercase(raw);
  const auto cps = text::decode(lowered);

  // Keys are tried longest first; equal lengths fall back to map order.
  std::vector<std::pair<std::u32string, const std::string*>> keys;
  keys.reserve(dict.size());
  for (const auto& [key, expansion] : dict.entries()) {
    std::u32string k;
    for (const auto& cp : text::decode(key)) k.push_back(cp.value);
    keys.emplace_back(std::move(k), &expansion);
  }
  std::stable_sort(keys.begin(), keys.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });

  std::string expanded;
  expanded.reserve(lowered.size());
  std::size_t i = 0;
  while (i < cps.size()) {
    const bool at_boundary = i == 0 || !text::is_word(cps[i - 1].value);
    bool replaced = false;
    if (at_boundary && text::is_word(cps[i].value)) {
      for (const auto& [key, expansion] : keys) {
        const std::size_t end = i + key.size();
        if (end > cps.size()) continue;
        bool match = true;
        for (std::size_t k = 0; k < key.size() && match; ++k) match = cps[i + k].value == key[k];
        if (!match) continue;
        if (end < cps.size() && text::is_word(cps[end].value)) continue;
        expanded += *expansion;
        i = end;
        replaced = true;
        break;
      }
    }
    if (!replaced) {
      expanded.append(lowered, cps[i].byte_offset, cps[i].byte_length);
      ++i;
    }
  }

  std::vector<std::string> kept;
  for (auto& token : text::split_whitespace(expanded)) {
    if (!stopwords.contains(token)) kept.push_back(std::move(token));
  }
  return text::join(kept, " ");
}

std::string make_chunk_id(std::string_view doc_id, std::size_t seq) {
  std::uint64_t h = fnv1a64(doc_id);
  h = fnv1a64(std::string_view("\x1f", 1), h);
  h = fnv1a64(std::to_string(seq), h);
  return to_hex(h);
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkOptions& options,
                                  const AbbreviationDictionary& dict, const Stopwords& stopwords) {
  if (options.size == 0 || options.overlap >= options.size) {
    throw Error(ErrorCode::InvalidChunking,
                "overlap (" + std::to_string(options.overlap) + ") must be smaller than size (" +
                    std::to_string(options.size) + ")");
  }
  if (blank(doc.text)) throw Error(ErrorCode::EmptyDocument, "empty document '" + doc.doc_id + "'");

  const auto cps = text::decode(doc.text);
  const std::size_t n = cps.size();
  const std::size_t snap_span = options.size * 15 / 100;
  auto byte_at = [&](std::size_t cp_index) {
    return cp_index < n ? cps[cp_index].byte_offset : doc.text.size();
  };

  std::vector<Chunk> chunks;
  std::size_t start = 0;
  while (true) {
    std::size_t end = std::min(start + options.size, n);
    if (end < n && options.snap_to_whitespace) {
      // Look for whitespace in the trailing 15% of the window; the chunk
      // then ends just after it.
      const std::size_t floor = end - snap_span;
      for (std::size_t p = end; p > floor && p > start; --p) {
        if (text::is_space(cps[p - 1].value)) {
          if (p > start + options.overlap) end = p;
          break;
        }
      }
    }

    Chunk c;
    c.doc_id = doc.doc_id;
    c.seq = chunks.size();
    c.chunk_id = make_chunk_id(doc.doc_id, c.seq);
    c.char_begin = start;
    c.char_end = end;
    c.text = doc.text.substr(byte_at(start), byte_at(end) - byte_at(start));
    c.norm_text = normalize(c.text, dict, stopwords);
    chunks.push_back(std::move(c));

    if (end >= n) break;
    start = end - options.overlap;
  }
  return chunks;
}

}  // namespace catrag
