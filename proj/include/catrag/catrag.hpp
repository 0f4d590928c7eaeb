#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catrag/embed.hpp"
#include "catrag/error.hpp"
#include "catrag/ingest.hpp"
#include "catrag/kgraph.hpp"
#include "catrag/llm_gateway.hpp"
#include "catrag/ner.hpp"
#include "catrag/router.hpp"
#include "catrag/vstore.hpp"

namespace catrag {

/// Text resources shared by construct and query.
struct Resources {
  AbbreviationDictionary dictionary;
  Stopwords stopwords;
  std::vector<std::string> gazetteer;
};

struct Providers {
  std::shared_ptr<const EmbeddingProvider> embedder;
  std::shared_ptr<const GenerationProvider> generator;
  std::shared_ptr<const EntityExtractor> ner;
};

struct BuildReport {
  std::size_t documents = 0;
  std::size_t chunks = 0;
  std::size_t entities = 0;
  std::size_t mentions = 0;
  std::size_t relations = 0;
  std::size_t rejected_triplets = 0;
  std::size_t relation_failures = 0;
  std::size_t ner_fallbacks = 0;
  std::map<std::string, std::size_t> chunks_per_category;
  double seconds = 0.0;

  std::string to_string() const;
};

struct BuildResult {
  RegulationGraph graph;
  VectorStore store;
  BuildReport report;
};

/// Builds the paired vector index and category-partitioned graph: every chunk
/// is embedded and stored, routed to a category, mined for entities, and
/// linked by validated relations. Embedding failures abort; relation failures
/// are logged and the chunk keeps zero relations.
BuildResult construct(std::span<const Document> documents, const ChunkOptions& chunking,
                      const RouterModel& router, const Resources& resources, const Providers& providers);

/// Writes graph and store through temp files, renaming only when both were
/// written.
void persist(const BuildResult& result, const std::filesystem::path& graph_path,
             const std::filesystem::path& vstore_path);

enum class RetrievalMode { CatRag, Rag };

std::string_view to_string(RetrievalMode mode);
std::optional<RetrievalMode> parse_mode(std::string_view name);

struct QueryConfig {
  std::size_t k_vec = 5;
  std::size_t k_graph = 5;
  double sim_threshold = 0.7;
  double min_vec_score = -1.0;  // vector hits below this are dropped; -1 keeps all
  std::size_t max_context_chars = 24000;
  RetrievalMode mode = RetrievalMode::CatRag;

  void validate() const;
};

struct StageTimings {
  double normalize_ms = 0.0;
  double embed_ms = 0.0;
  double classify_ms = 0.0;
  double vector_ms = 0.0;
  double graph_ms = 0.0;
  double expand_ms = 0.0;
  double assemble_ms = 0.0;
  double generate_ms = 0.0;
  double total_ms = 0.0;

  double stage_sum() const noexcept {
    return normalize_ms + embed_ms + classify_ms + vector_ms + graph_ms + expand_ms + assemble_ms + generate_ms;
  }
};

struct QueryResult {
  std::string query;
  RetrievalMode mode = RetrievalMode::CatRag;
  std::string answer;
  std::optional<CategoryLabel> label;  // unset in RAG mode
  double confidence = 0.0;
  std::vector<ScoredHit> vec_hits;
  std::vector<ScoredHit> graph_hits;
  std::vector<std::string> entities;  // first occurrence order
  std::vector<RelationTriplet> relations;
  std::vector<std::string> merged_context_ids;
  AssembledContext context;
  StageTimings timings;
};

/// Generation failed; `evidence` holds everything retrieved before the call.
class GenerationFailure : public Error {
 public:
  GenerationFailure(const std::string& message, QueryResult evidence)
      : Error(ErrorCode::GenerationUnavailable, message), evidence_(std::move(evidence)) {}
  const QueryResult& evidence() const noexcept { return evidence_; }

 private:
  QueryResult evidence_;
};

/// Frozen stores plus providers. Query is read-only and safe to call from
/// many threads.
class Engine {
 public:
  Engine(RegulationGraph graph, VectorStore store, RouterModel router, Resources resources,
         Providers providers);

  /// Runs the hybrid pipeline. Throws EmptyQuery, GenerationFailure.
  QueryResult query(std::string_view q, const QueryConfig& config) const;

  /// Text as fed to the router and embedder.
  std::string prepare(std::string_view raw) const;

  const RegulationGraph& graph() const noexcept { return graph_; }
  const VectorStore& store() const noexcept { return store_; }
  const RouterModel& router() const noexcept { return router_; }
  const Providers& providers() const noexcept { return providers_; }

 private:
  RegulationGraph graph_;
  VectorStore store_;
  RouterModel router_;
  Resources resources_;
  Providers providers_;
};

}  // namespace catrag
