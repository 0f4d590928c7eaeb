#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "catrag/ingest.hpp"
#include "catrag/llm_gateway.hpp"
#include "catrag/ner.hpp"
#include "catrag/vstore.hpp"

namespace catrag {

struct ChunkNode {
  std::string chunk_id;
  std::string doc_id;
  std::size_t seq = 0;
  std::string text;
  std::string category;
  std::set<std::string> mentions;  // entity canonicals
};

struct EntityNode {
  std::string canonical;
  std::string surface;  // first surface seen
  std::set<std::string> mentioned_by;
};

struct CategorySubgraphView {
  std::string label;
  std::set<std::string> chunk_ids;
  std::set<std::string> entities;
  std::vector<RelationTriplet> relations;  // sorted

  friend bool operator==(const CategorySubgraphView&, const CategorySubgraphView&) = default;
};

struct GraphStats {
  std::size_t categories = 0;
  std::size_t chunks = 0;
  std::size_t entities = 0;
  std::size_t has_chunk = 0;
  std::size_t mentions = 0;
  std::size_t related_to = 0;

  friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

/// Three-layer graph (category → chunk → entity) with provenance-stamped
/// entity relations, partitioned by category. RELATED_TO edges are stored
/// with subject < object and treated as undirected.
class RegulationGraph {
 public:
  /// Creates the chunk node if needed and attaches it to `label` (created on
  /// first use). Same label again is a no-op; another label throws
  /// ChunkReattachment.
  void attach_chunk(const Chunk& chunk, const std::string& label);

  /// Throws UnknownChunk.
  void add_mention(const std::string& chunk_id, const Entity& entity);

  /// Throws UnknownChunk / ProvenanceViolation.
  void add_relation(RelationTriplet triplet);

  const std::map<std::string, std::set<std::string>>& categories() const noexcept { return categories_; }
  const std::map<std::string, ChunkNode>& chunks() const noexcept { return chunks_; }
  const std::map<std::string, EntityNode>& entities() const noexcept { return entities_; }
  const ChunkNode* find_chunk(const std::string& chunk_id) const;

  /// Entity canonicals mentioned by the chunk (empty for unknown chunks).
  std::set<std::string> entities_of(const std::string& chunk_id) const;

  /// Relations with both endpoints in `entity_set` and provenance in `label`,
  /// ordered by (chunk_id, subject, predicate, object).
  std::vector<RelationTriplet> relations_among(const std::set<std::string>& entity_set,
                                               const std::string& label) const;

  /// All relations touching `entity`, ordered, at most `limit`.
  std::vector<RelationTriplet> neighbors(const std::string& entity, std::size_t limit) const;

  /// Graph-side candidate retrieval: chunks of `label` scored against the
  /// store, kept when score >= threshold, best k by the store's order.
  std::vector<ScoredHit> top_k_chunks(const std::string& label, const EmbeddingVector& query,
                                      std::size_t k, double threshold, const VectorStore& store) const;

  /// Incrementally maintained view.
  CategorySubgraphView subgraph(const std::string& label) const;
  /// Same view rebuilt from the node/edge tables.
  CategorySubgraphView recompute_subgraph(const std::string& label) const;

  std::vector<RelationTriplet> all_relations() const;
  GraphStats stats() const;

  void save(const std::filesystem::path& path) const;
  std::string serialize() const;
  /// Throws GraphIntegrityError naming the offending line.
  static RegulationGraph load(const std::filesystem::path& path);
  static RegulationGraph deserialize(const std::string& jsonl, const std::string& origin = "graph");

 private:
  struct CategoryIndex {
    std::map<std::string, std::size_t> entity_refs;  // canonical → mentioning chunks in label
    std::set<RelationTriplet> relations;
  };

  std::map<std::string, std::set<std::string>> categories_;  // label → chunk ids
  std::map<std::string, ChunkNode> chunks_;
  std::map<std::string, EntityNode> entities_;
  std::map<std::string, std::set<RelationTriplet>> relations_by_chunk_;
  std::map<std::string, std::set<RelationTriplet>> relations_by_entity_;
  std::map<std::string, CategoryIndex> views_;
};

}  // namespace catrag
