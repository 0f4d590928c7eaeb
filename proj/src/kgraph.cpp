#include "catrag/kgraph.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "catrag/error.hpp"
#include "catrag/io_util.hpp"

namespace catrag {

using nlohmann::json;

void RegulationGraph::attach_chunk(const Chunk& chunk, const std::string& label) {
  if (auto it = chunks_.find(chunk.chunk_id); it != chunks_.end()) {
    if (it->second.category == label) return;
    throw Error(ErrorCode::ChunkReattachment, "chunk " + chunk.chunk_id + " already belongs to '" +
                                                  it->second.category + "', cannot attach to '" + label + "'");
  }
  ChunkNode node{chunk.chunk_id, chunk.doc_id, chunk.seq, chunk.text, label, {}};
  chunks_.emplace(chunk.chunk_id, std::move(node));
  categories_[label].insert(chunk.chunk_id);
  views_[label];
}

void RegulationGraph::add_mention(const std::string& chunk_id, const Entity& entity) {
  auto it = chunks_.find(chunk_id);
  if (it == chunks_.end()) throw Error(ErrorCode::UnknownChunk, "unknown chunk " + chunk_id);
  if (entity.canonical.empty()) throw Error(ErrorCode::ProvenanceViolation, "entity without canonical form");
  auto& node = entities_[entity.canonical];
  if (node.canonical.empty()) {
    node.canonical = entity.canonical;
    node.surface = entity.surface.empty() ? entity.canonical : entity.surface;
  }
  if (!it->second.mentions.insert(entity.canonical).second) return;
  node.mentioned_by.insert(chunk_id);
  ++views_[it->second.category].entity_refs[entity.canonical];
}

void RegulationGraph::add_relation(RelationTriplet t) {
  auto it = chunks_.find(t.chunk_id);
  if (it == chunks_.end()) throw Error(ErrorCode::UnknownChunk, "relation cites unknown chunk " + t.chunk_id);
  if (t.subject > t.object) std::swap(t.subject, t.object);
  const auto& mentioned = it->second.mentions;
  if (t.subject == t.object || !mentioned.contains(t.subject) || !mentioned.contains(t.object)) {
    throw Error(ErrorCode::ProvenanceViolation, "relation (" + t.subject + ", " + t.predicate + ", " +
                                                    t.object + ") not grounded in chunk " + t.chunk_id);
  }
  if (t.predicate.empty()) throw Error(ErrorCode::ProvenanceViolation, "relation with empty predicate");
  if (!relations_by_chunk_[t.chunk_id].insert(t).second) return;
  relations_by_entity_[t.subject].insert(t);
  relations_by_entity_[t.object].insert(t);
  views_[it->second.category].relations.insert(std::move(t));
}

const ChunkNode* RegulationGraph::find_chunk(const std::string& chunk_id) const {
  auto it = chunks_.find(chunk_id);
  return it == chunks_.end() ? nullptr : &it->second;
}

std::set<std::string> RegulationGraph::entities_of(const std::string& chunk_id) const {
  const auto* c = find_chunk(chunk_id);
  return c ? c->mentions : std::set<std::string>{};
}

std::vector<RelationTriplet> RegulationGraph::relations_among(const std::set<std::string>& entity_set,
                                                              const std::string& label) const {
  std::vector<RelationTriplet> out;
  if (entity_set.size() < 2) return out;
  auto cat = categories_.find(label);
  if (cat == categories_.end()) return out;
  for (const auto& chunk_id : cat->second) {
    auto rels = relations_by_chunk_.find(chunk_id);
    if (rels == relations_by_chunk_.end()) continue;
    for (const auto& r : rels->second) {
      if (entity_set.contains(r.subject) && entity_set.contains(r.object)) out.push_back(r);
    }
  }
  return out;
}

std::vector<RelationTriplet> RegulationGraph::neighbors(const std::string& entity, std::size_t limit) const {
  std::vector<RelationTriplet> out;
  auto it = relations_by_entity_.find(entity);
  if (it == relations_by_entity_.end()) return out;
  for (const auto& r : it->second) {
    if (out.size() >= limit) break;
    out.push_back(r);
  }
  return out;
}

std::vector<ScoredHit> RegulationGraph::top_k_chunks(const std::string& label, const EmbeddingVector& query,
                                                     std::size_t k, double threshold,
                                                     const VectorStore& store) const {
  std::vector<ScoredHit> hits;
  auto cat = categories_.find(label);
  if (cat == categories_.end() || k == 0) return hits;
  for (const auto& chunk_id : cat->second) {
    const auto* rec = store.find(chunk_id);
    if (rec == nullptr) continue;
    const double score = cosine(query, rec->vector);
    if (score >= threshold) hits.push_back({chunk_id, score, rec->text});
  }
  std::sort(hits.begin(), hits.end(), hit_before);
  if (hits.size() > k) hits.resize(k);
  return hits;
}

CategorySubgraphView RegulationGraph::subgraph(const std::string& label) const {
  CategorySubgraphView view{label, {}, {}, {}};
  auto cat = categories_.find(label);
  if (cat == categories_.end()) return view;
  view.chunk_ids = cat->second;
  if (auto v = views_.find(label); v != views_.end()) {
    for (const auto& [canonical, refs] : v->second.entity_refs) {
      if (refs > 0) view.entities.insert(canonical);
    }
    view.relations.assign(v->second.relations.begin(), v->second.relations.end());
  }
  return view;
}

CategorySubgraphView RegulationGraph::recompute_subgraph(const std::string& label) const {
  CategorySubgraphView view{label, {}, {}, {}};
  for (const auto& [id, chunk] : chunks_) {
    if (chunk.category != label) continue;
    view.chunk_ids.insert(id);
    view.entities.insert(chunk.mentions.begin(), chunk.mentions.end());
  }
  std::set<RelationTriplet> rels;
  for (const auto& [chunk_id, triplets] : relations_by_chunk_) {
    if (view.chunk_ids.contains(chunk_id)) rels.insert(triplets.begin(), triplets.end());
  }
  view.relations.assign(rels.begin(), rels.end());
  return view;
}

std::vector<RelationTriplet> RegulationGraph::all_relations() const {
  std::vector<RelationTriplet> out;
  for (const auto& [_, triplets] : relations_by_chunk_) out.insert(out.end(), triplets.begin(), triplets.end());
  return out;
}

GraphStats RegulationGraph::stats() const {
  GraphStats s;
  s.categories = categories_.size();
  s.chunks = chunks_.size();
  s.entities = entities_.size();
  s.has_chunk = chunks_.size();
  for (const auto& [_, c] : chunks_) s.mentions += c.mentions.size();
  for (const auto& [_, r] : relations_by_chunk_) s.related_to += r.size();
  return s;
}

std::string RegulationGraph::serialize() const {
  std::string out;
  auto line = [&out](const json& j) { out += j.dump() + "\n"; };
  for (const auto& [name, _] : categories_) line({{"kind", "category"}, {"name", name}});
  for (const auto& [id, c] : chunks_) {
    line({{"kind", "chunk"}, {"chunk_id", id}, {"doc_id", c.doc_id}, {"seq", c.seq}, {"text", c.text}});
  }
  for (const auto& [canonical, e] : entities_) {
    line({{"kind", "entity"}, {"canonical", canonical}, {"surface", e.surface}});
  }
  for (const auto& [name, ids] : categories_) {
    for (const auto& id : ids) line({{"kind", "has_chunk"}, {"category", name}, {"chunk_id", id}});
  }
  for (const auto& [id, c] : chunks_) {
    for (const auto& e : c.mentions) line({{"kind", "mentions"}, {"chunk_id", id}, {"entity", e}});
  }
  for (const auto& r : all_relations()) {
    line({{"kind", "related_to"},
          {"subject", r.subject},
          {"predicate", r.predicate},
          {"object", r.object},
          {"chunk_id", r.chunk_id}});
  }
  return out;
}

void RegulationGraph::save(const std::filesystem::path& path) const { io::write_file_atomic(path, serialize()); }

RegulationGraph RegulationGraph::load(const std::filesystem::path& path) {
  return deserialize(io::read_file(path), path.string());
}

RegulationGraph RegulationGraph::deserialize(const std::string& jsonl, const std::string& origin) {
  struct Pending {
    std::size_t line;
    json record;
  };
  std::vector<Pending> categories, chunks, entities, has_chunk, mentions, related;
  std::istringstream in(jsonl);
  std::string text_line;
  std::size_t lineno = 0;
  auto fail = [&origin](std::size_t at, const std::string& what) {
    return Error(ErrorCode::GraphIntegrityError, origin + ":" + std::to_string(at) + ": " + what);
  };

  while (std::getline(in, text_line)) {
    ++lineno;
    if (text_line.empty()) continue;
    json rec;
    try {
      rec = json::parse(text_line);
    } catch (const json::exception& e) {
      throw fail(lineno, std::string("unparsable record: ") + e.what());
    }
    const auto kind = rec.value("kind", std::string());
    if (kind == "category") categories.push_back({lineno, rec});
    else if (kind == "chunk") chunks.push_back({lineno, rec});
    else if (kind == "entity") entities.push_back({lineno, rec});
    else if (kind == "has_chunk") has_chunk.push_back({lineno, rec});
    else if (kind == "mentions") mentions.push_back({lineno, rec});
    else if (kind == "related_to") related.push_back({lineno, rec});
    else throw fail(lineno, "unknown record kind '" + kind + "'");
  }

  RegulationGraph g;
  std::map<std::string, Chunk> chunk_records;
  std::map<std::string, std::string> surfaces;
  std::set<std::string> category_names;
  std::size_t current = 0;
  try {
    for (const auto& p : categories) {
      current = p.line;
      category_names.insert(p.record.at("name").get<std::string>());
    }
    for (const auto& p : chunks) {
      current = p.line;
      Chunk c;
      c.chunk_id = p.record.at("chunk_id").get<std::string>();
      c.doc_id = p.record.at("doc_id").get<std::string>();
      c.seq = p.record.at("seq").get<std::size_t>();
      c.text = p.record.at("text").get<std::string>();
      if (!chunk_records.emplace(c.chunk_id, c).second) throw fail(p.line, "duplicate chunk " + c.chunk_id);
    }
    for (const auto& p : entities) {
      current = p.line;
      surfaces[p.record.at("canonical").get<std::string>()] = p.record.at("surface").get<std::string>();
    }
    for (const auto& p : has_chunk) {
      current = p.line;
      const auto label = p.record.at("category").get<std::string>();
      const auto id = p.record.at("chunk_id").get<std::string>();
      if (!category_names.contains(label)) throw fail(p.line, "has_chunk cites unknown category '" + label + "'");
      auto c = chunk_records.find(id);
      if (c == chunk_records.end()) throw fail(p.line, "has_chunk cites unknown chunk " + id);
      if (g.find_chunk(id) != nullptr) throw fail(p.line, "chunk " + id + " has more than one category");
      g.attach_chunk(c->second, label);
    }
    for (const auto& [id, _] : chunk_records) {
      if (g.find_chunk(id) == nullptr) throw fail(0, "chunk " + id + " has no category");
    }
    for (const auto& name : category_names) g.categories_[name];
    for (const auto& p : mentions) {
      current = p.line;
      const auto id = p.record.at("chunk_id").get<std::string>();
      const auto canonical = p.record.at("entity").get<std::string>();
      auto s = surfaces.find(canonical);
      if (s == surfaces.end()) throw fail(p.line, "mention of unknown entity '" + canonical + "'");
      if (g.find_chunk(id) == nullptr) throw fail(p.line, "mention from unknown chunk " + id);
      g.add_mention(id, Entity{s->second, canonical, id});
    }
    for (const auto& [canonical, surface] : surfaces) {
      auto& node = g.entities_[canonical];
      node.canonical = canonical;
      node.surface = surface;
    }
    for (const auto& p : related) {
      current = p.line;
      g.add_relation({p.record.at("subject").get<std::string>(), p.record.at("predicate").get<std::string>(),
                      p.record.at("object").get<std::string>(), p.record.at("chunk_id").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw fail(current, std::string("malformed record: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::GraphIntegrityError) throw;
    throw fail(current, e.what());
  }
  return g;
}

}  // namespace catrag
