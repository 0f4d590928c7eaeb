#include "catrag/catrag.hpp"

#include <chrono>
#include <set>
#include <sstream>

#include "catrag/io_util.hpp"
#include "catrag/log.hpp"
#include "catrag/text.hpp"

namespace catrag {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string routing_text(const Chunk& c) {
  return c.norm_text.empty() ? text::lowercase(c.text) : c.norm_text;
}

}  // namespace

std::string BuildReport::to_string() const {
  std::ostringstream os;
  os << "documents          " << documents << "\n"
     << "chunks             " << chunks << "\n"
     << "entities           " << entities << "\n"
     << "mentions           " << mentions << "\n"
     << "relations          " << relations << "\n"
     << "rejected triplets  " << rejected_triplets << "\n"
     << "relation failures  " << relation_failures << "\n"
     << "ner fallbacks      " << ner_fallbacks << "\n";
  for (const auto& [label, n] : chunks_per_category) os << "  category " << label << ": " << n << " chunks\n";
  os << "elapsed            " << seconds << " s\n";
  return os.str();
}

BuildResult construct(std::span<const Document> documents, const ChunkOptions& chunking,
                      const RouterModel& router, const Resources& resources, const Providers& providers) {
  if (documents.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus has no documents");
  if (!providers.embedder || !providers.generator || !providers.ner) {
    throw Error(ErrorCode::ConfigError, "construct requires embedding, generation and NER providers");
  }
  const auto started = Clock::now();

  std::vector<Chunk> chunks;
  for (const auto& doc : documents) {
    auto cs = chunk_document(doc, chunking, resources.dictionary, resources.stopwords);
    chunks.insert(chunks.end(), std::make_move_iterator(cs.begin()), std::make_move_iterator(cs.end()));
  }

  std::vector<std::string> inputs;
  inputs.reserve(chunks.size());
  for (const auto& c : chunks) inputs.push_back(routing_text(c));
  const auto vectors = embed_texts(*providers.embedder, inputs);

  BuildResult result{RegulationGraph{}, VectorStore(providers.embedder->dim()), BuildReport{}};
  auto& report = result.report;
  report.documents = documents.size();

  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const auto& chunk = chunks[i];
    result.store.upsert({chunk.chunk_id, chunk.text, vectors[i]});

    const auto label = router.predict(inputs[i]).label.name;
    result.graph.attach_chunk(chunk, label);

    const auto entities = providers.ner->extract(chunk.text, chunk.chunk_id);
    for (const auto& e : entities) result.graph.add_mention(chunk.chunk_id, e);

    try {
      auto extraction = providers.generator->extract_relations(chunk.text, entities, chunk.chunk_id);
      report.rejected_triplets += extraction.rejected;
      for (auto& t : extraction.triplets) {
        try {
          result.graph.add_relation(std::move(t));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::ProvenanceViolation) throw;
          ++report.rejected_triplets;
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::RelationParse && e.code() != ErrorCode::ProviderUnavailable &&
          e.code() != ErrorCode::ProviderContract) {
        throw;
      }
      ++report.relation_failures;
      log::warn("relation extraction failed for chunk " + chunk.chunk_id + ": " + e.what());
    }
  }

  if (const auto* http = dynamic_cast<const HttpExtractor*>(providers.ner.get())) {
    report.ner_fallbacks = http->fallbacks();
    if (report.ner_fallbacks > 0) {
      log::warn("NER provider unavailable for " + std::to_string(report.ner_fallbacks) +
                " chunk(s); heuristic extractor used instead");
    }
  }

  const auto stats = result.graph.stats();
  report.chunks = stats.chunks;
  report.entities = stats.entities;
  report.mentions = stats.mentions;
  report.relations = stats.related_to;
  for (const auto& [label, ids] : result.graph.categories()) report.chunks_per_category[label] = ids.size();
  report.seconds = std::chrono::duration<double>(Clock::now() - started).count();
  return result;
}

void persist(const BuildResult& result, const std::filesystem::path& graph_path,
             const std::filesystem::path& vstore_path) {
  // Serialize the graph first so a failure leaves both files untouched.
  const auto graph_text = result.graph.serialize();
  result.store.save(vstore_path);
  io::write_file_atomic(graph_path, graph_text);
}

std::string_view to_string(RetrievalMode mode) { return mode == RetrievalMode::Rag ? "rag" : "catrag"; }

std::optional<RetrievalMode> parse_mode(std::string_view name) {
  if (name == "catrag") return RetrievalMode::CatRag;
  if (name == "rag") return RetrievalMode::Rag;
  return std::nullopt;
}

void QueryConfig::validate() const {
  if (k_vec < 1 || k_graph < 1) throw Error(ErrorCode::ConfigError, "k_vec and k_graph must be >= 1");
  if (!(sim_threshold >= 0.0 && sim_threshold <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "sim_threshold must lie in [0, 1]");
  }
  if (!(min_vec_score >= -1.0 && min_vec_score <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "min_vec_score must lie in [-1, 1]");
  }
}

Engine::Engine(RegulationGraph graph, VectorStore store, RouterModel router, Resources resources,
               Providers providers)
    : graph_(std::move(graph)),
      store_(std::move(store)),
      router_(std::move(router)),
      resources_(std::move(resources)),
      providers_(std::move(providers)) {
  if (!providers_.embedder || !providers_.generator) {
    throw Error(ErrorCode::ConfigError, "engine requires embedding and generation providers");
  }
}

std::string Engine::prepare(std::string_view raw) const {
  auto norm = normalize(raw, resources_.dictionary, resources_.stopwords);
  return norm.empty() ? text::canonicalize(raw) : norm;
}

QueryResult Engine::query(std::string_view q, const QueryConfig& config) const {
  // A threshold above 1 is allowed here and simply yields no graph hits.
  if (config.k_vec < 1 || config.k_graph < 1 || !(config.sim_threshold >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "k_vec, k_graph must be >= 1 and sim_threshold >= 0");
  }
  const auto started = Clock::now();
  if (text::canonicalize(q).empty()) throw Error(ErrorCode::EmptyQuery, "query is empty");

  QueryResult r;
  r.query = std::string(q);
  r.mode = config.mode;
  auto& t = r.timings;

  auto mark = Clock::now();
  const auto prepared = prepare(q);
  t.normalize_ms = ms_since(mark);

  mark = Clock::now();
  const auto query_vec = embed_text(*providers_.embedder, prepared);
  t.embed_ms = ms_since(mark);

  const bool hybrid = config.mode == RetrievalMode::CatRag;
  if (hybrid) {
    mark = Clock::now();
    const auto prediction = router_.predict(prepared);
    r.label = prediction.label;
    r.confidence = prediction.confidence;
    t.classify_ms = ms_since(mark);
  }

  mark = Clock::now();
  r.vec_hits = store_.top_k(query_vec, config.k_vec);
  std::erase_if(r.vec_hits, [&](const ScoredHit& h) { return h.score < config.min_vec_score; });
  t.vector_ms = ms_since(mark);

  if (hybrid) {
    mark = Clock::now();
    r.graph_hits = graph_.top_k_chunks(r.label->name, query_vec, config.k_graph, config.sim_threshold, store_);
    t.graph_ms = ms_since(mark);

    mark = Clock::now();
    std::set<std::string> entity_set;
    for (const auto& hit : r.graph_hits) {
      for (const auto& e : graph_.entities_of(hit.chunk_id)) {
        if (entity_set.insert(e).second) r.entities.push_back(e);
      }
    }
    r.relations = graph_.relations_among(entity_set, r.label->name);
    t.expand_ms = ms_since(mark);
  }

  mark = Clock::now();
  std::set<std::string> seen;
  auto add = [&](const ScoredHit& hit, ContextChunk::Origin origin) {
    if (!seen.insert(hit.chunk_id).second) return;
    r.merged_context_ids.push_back(hit.chunk_id);
    const auto* node = graph_.find_chunk(hit.chunk_id);
    r.context.chunks.push_back({hit.chunk_id, hit.score, node ? node->category : std::string(), hit.text, origin});
  };
  for (const auto& hit : r.vec_hits) add(hit, ContextChunk::Origin::Vector);
  for (const auto& hit : r.graph_hits) add(hit, ContextChunk::Origin::Graph);
  r.context.entities = r.entities;
  r.context.relations = r.relations;
  t.assemble_ms = ms_since(mark);

  mark = Clock::now();
  try {
    r.answer = generate_answer(*providers_.generator, q, r.context, config.max_context_chars);
  } catch (const Error& e) {
    t.generate_ms = ms_since(mark);
    t.total_ms = ms_since(started);
    throw GenerationFailure(e.what(), std::move(r));
  }
  t.generate_ms = ms_since(mark);
  t.total_ms = ms_since(started);
  return r;
}

}  // namespace catrag
