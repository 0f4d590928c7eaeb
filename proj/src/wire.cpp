#include "catrag/wire.hpp"

namespace catrag::wire {

using nlohmann::json;

json to_json(const ScoredHit& hit, const RegulationGraph& graph) {
  const auto* node = graph.find_chunk(hit.chunk_id);
  return {{"chunk_id", hit.chunk_id},
          {"score", hit.score},
          {"text", hit.text},
          {"category", node ? json(node->category) : json(nullptr)}};
}

json to_json(const RelationTriplet& r) {
  return {{"subject", r.subject}, {"predicate", r.predicate}, {"object", r.object}, {"chunk_id", r.chunk_id}};
}

json to_json(const GraphStats& s) {
  return {{"categories", s.categories}, {"chunks", s.chunks},     {"entities", s.entities},
          {"has_chunk", s.has_chunk},   {"mentions", s.mentions}, {"related_to", s.related_to}};
}

json to_json(const StageTimings& t) {
  return {{"normalize_ms", t.normalize_ms}, {"embed_ms", t.embed_ms},       {"classify_ms", t.classify_ms},
          {"vector_ms", t.vector_ms},       {"graph_ms", t.graph_ms},       {"expand_ms", t.expand_ms},
          {"assemble_ms", t.assemble_ms},   {"generate_ms", t.generate_ms}, {"total_ms", t.total_ms}};
}

json to_json(const QueryResult& r, const RegulationGraph& graph) {
  json vec = json::array(), graph_hits = json::array(), rels = json::array();
  for (const auto& h : r.vec_hits) vec.push_back(to_json(h, graph));
  for (const auto& h : r.graph_hits) graph_hits.push_back(to_json(h, graph));
  for (const auto& rel : r.relations) rels.push_back(to_json(rel));
  json label = nullptr;
  if (r.label) label = {{"name", r.label->name}, {"id", r.label->id}, {"confidence", r.confidence}};
  return {{"query", r.query},
          {"mode", std::string(to_string(r.mode))},
          {"answer", r.answer},
          {"label", label},
          {"vec_hits", vec},
          {"graph_hits", graph_hits},
          {"entities", r.entities},
          {"relations", rels},
          {"merged_context_ids", r.merged_context_ids},
          {"timings", to_json(r.timings)}};
}

json to_json(const Prediction& p, const RouterModel& router) {
  json dist = json::array();
  for (const auto& l : router.labels()) dist.push_back({{"label", l.name}, {"probability", p.distribution[l.id]}});
  return {{"label", p.label.name}, {"confidence", p.confidence}, {"distribution", dist}, {"low_signal", p.low_signal}};
}

json error_envelope(std::string_view code, std::string_view message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace catrag::wire
