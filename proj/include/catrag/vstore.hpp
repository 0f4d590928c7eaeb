#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "catrag/embed.hpp"

namespace catrag {

struct VectorRecord {
  std::string chunk_id;
  std::string text;
  EmbeddingVector vector;
};

struct ScoredHit {
  std::string chunk_id;
  double score = 0.0;  // cosine
  std::string text;
};

/// Orders hits by score descending, then chunk_id ascending.
bool hit_before(const ScoredHit& a, const ScoredHit& b) noexcept;

/// Exact dense index. Vectors are L2-normalized on upsert. Single writer;
/// concurrent readers are safe once construction is finished.
class VectorStore {
 public:
  /// dim 0 leaves the dimension unset until the first upsert.
  explicit VectorStore(std::size_t dim = 0);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  void upsert(VectorRecord record);
  const VectorRecord* find(const std::string& chunk_id) const;
  const std::vector<VectorRecord>& records() const noexcept { return records_; }

  /// Exact top-k by cosine. Empty store → empty result.
  std::vector<ScoredHit> top_k(const EmbeddingVector& query, std::size_t k) const;

  /// JSONL: header {"dim","count"} then one {"chunk_id","text","vector"} per
  /// line, sorted by chunk_id. Written via temp file + rename.
  void save(const std::filesystem::path& path) const;
  static VectorStore load(const std::filesystem::path& path);

 private:
  std::size_t dim_;
  std::vector<VectorRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace catrag
