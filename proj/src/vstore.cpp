#include "catrag/vstore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "catrag/error.hpp"
#include "catrag/io_util.hpp"

namespace catrag {

using nlohmann::json;

bool hit_before(const ScoredHit& a, const ScoredHit& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.chunk_id < b.chunk_id;
}

VectorStore::VectorStore(std::size_t dim) : dim_(dim) {}

void VectorStore::upsert(VectorRecord record) {
  if (dim_ == 0 && records_.empty()) dim_ = record.vector.dim();
  if (record.vector.dim() != dim_ || dim_ == 0) {
    throw Error(ErrorCode::DimMismatch, "record '" + record.chunk_id + "' has dim " +
                                            std::to_string(record.vector.dim()) + ", store dim " +
                                            std::to_string(dim_));
  }
  if (std::abs(record.vector.norm() - 1.0) > 1e-6) record.vector = record.vector.normalized();
  if (auto it = index_.find(record.chunk_id); it != index_.end()) {
    records_[it->second] = std::move(record);
    return;
  }
  index_.emplace(record.chunk_id, records_.size());
  records_.push_back(std::move(record));
}

const VectorRecord* VectorStore::find(const std::string& chunk_id) const {
  auto it = index_.find(chunk_id);
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::vector<ScoredHit> VectorStore::top_k(const EmbeddingVector& query, std::size_t k) const {
  if (records_.empty()) return {};
  if (query.dim() != dim_) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(query.dim()) +
                                            " != store dim " + std::to_string(dim_));
  }
  if (k == 0) return {};

  struct Candidate {
    double score;
    const VectorRecord* record;
  };
  std::vector<Candidate> scored;
  scored.reserve(records_.size());
  for (const auto& r : records_) scored.push_back({cosine(query, r.vector), &r});

  const auto better = [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.record->chunk_id < b.record->chunk_id;
  };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);

  std::vector<ScoredHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    hits.push_back({scored[i].record->chunk_id, scored[i].score, scored[i].record->text});
  }
  return hits;
}

void VectorStore::save(const std::filesystem::path& path) const {
  std::vector<const VectorRecord*> sorted;
  sorted.reserve(records_.size());
  for (const auto& r : records_) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const VectorRecord* a, const VectorRecord* b) { return a->chunk_id < b->chunk_id; });

  std::string out = json{{"count", records_.size()}, {"dim", dim_}}.dump() + "\n";
  char buf[32];
  for (const auto* r : sorted) {
    out += "{\"chunk_id\":" + json(r->chunk_id).dump() + ",\"text\":" + json(r->text).dump() +
           ",\"vector\":[";
    const auto values = r->vector.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) out += ',';
      // 9 significant digits round-trip any float exactly.
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(values[i]));
      out += buf;
    }
    out += "]}\n";
  }
  io::write_file_atomic(path, out);
}

VectorStore VectorStore::load(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> Error {
    return Error(ErrorCode::PersistenceError, path.string() + ":" + std::to_string(lineno) + ": " + what);
  };

  std::optional<VectorStore> store;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw fail(std::string("unparsable record (") + e.what() + ")");
    }
    try {
      if (!store) {
        const auto dim = rec.at("dim").get<std::size_t>();
        expected = rec.at("count").get<std::size_t>();
        store.emplace(dim);
        continue;
      }
      auto values = rec.at("vector").get<std::vector<float>>();
      if (values.size() != store->dim()) throw fail("vector has dim " + std::to_string(values.size()));
      if (store->find(rec.at("chunk_id").get<std::string>()) != nullptr) throw fail("duplicate chunk_id");
      VectorRecord r{rec.at("chunk_id").get<std::string>(), rec.at("text").get<std::string>(),
                     EmbeddingVector(std::move(values))};
      store->upsert(std::move(r));
    } catch (const json::exception& e) {
      throw fail(std::string("malformed record (") + e.what() + ")");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::PersistenceError) throw;
      throw fail(e.what());
    }
  }
  if (!store) return VectorStore();  // empty file
  if (store->size() != expected) {
    throw fail("header count " + std::to_string(expected) + " but " + std::to_string(store->size()) +
               " records");
  }
  return std::move(*store);
}

}  // namespace catrag
