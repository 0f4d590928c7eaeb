#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "catrag/error.hpp"
#include "catrag/hash.hpp"
#include "catrag/vstore.hpp"
#include "support.hpp"

using namespace catrag;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::IoError;
}

EmbeddingVector random_vec(SplitMix64& rng, std::size_t dim) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(rng.next_unit() * 2 - 1);
  return EmbeddingVector(std::move(v));
}

std::string id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "c%04zu", i);
  return buf;
}

// Brute force: score every record in double, sort by (score desc, id asc).
std::vector<std::pair<std::string, double>> oracle(const std::vector<std::pair<std::string, std::vector<double>>>& recs,
                                                   const std::vector<double>& q, std::size_t k) {
  auto unit = [](std::vector<double> v) {
    double n = 0;
    for (double x : v) n += x * x;
    for (double& x : v) x /= std::sqrt(n);
    return v;
  };
  const auto uq = unit(q);
  std::vector<std::pair<std::string, double>> all;
  for (const auto& [cid, v] : recs) {
    const auto uv = unit(v);
    double dot = 0;
    for (std::size_t i = 0; i < uv.size(); ++i) dot += uv[i] * uq[i];
    all.emplace_back(cid, dot);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace

TEST_CASE("top_k agrees with a brute-force oracle") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dim = 4 + rng.next_below(30);
    const std::size_t n = 1 + rng.next_below(80);
    VectorStore store(dim);
    std::vector<std::pair<std::string, std::vector<double>>> recs;
    for (std::size_t i = 0; i < n; ++i) {
      auto v = random_vec(rng, dim);
      recs.emplace_back(id(i), std::vector<double>(v.values().begin(), v.values().end()));
      store.upsert({id(i), "t", v});
    }
    auto q = random_vec(rng, dim);
    const std::size_t k = 1 + rng.next_below(n + 3);
    auto hits = store.top_k(q, k);
    auto want = oracle(recs, std::vector<double>(q.values().begin(), q.values().end()), k);
    REQUIRE(hits.size() == want.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
      CHECK(hits[i].score == doctest::Approx(want[i].second).epsilon(1e-5));
      if (i + 1 < hits.size()) CHECK(!hit_before(hits[i + 1], hits[i]));
    }
    // Ranked ids agree except where scores tie within float noise.
    for (std::size_t i = 0; i < hits.size(); ++i)
      if (hits[i].chunk_id != want[i].first) CHECK(std::abs(hits[i].score - want[i].second) < 1e-5);
  }
}

TEST_CASE("top_k for smaller k is a prefix") {
  SplitMix64 rng(12);
  VectorStore store(8);
  for (std::size_t i = 0; i < 40; ++i) store.upsert({id(i), "", random_vec(rng, 8)});
  auto q = random_vec(rng, 8);
  auto full = store.top_k(q, 40);
  for (std::size_t k = 1; k <= 40; ++k) {
    auto part = store.top_k(q, k);
    REQUIRE(part.size() == k);
    for (std::size_t i = 0; i < k; ++i) CHECK(part[i].chunk_id == full[i].chunk_id);
  }
}

TEST_CASE("ties are broken by ascending chunk id") {
  VectorStore store(2);
  store.upsert({"b", "", EmbeddingVector({1, 0})});
  store.upsert({"a", "", EmbeddingVector({2, 0})});
  store.upsert({"c", "", EmbeddingVector({0, 1})});
  auto hits = store.top_k(EmbeddingVector({1, 0}), 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].chunk_id == "a");
  CHECK(hits[1].chunk_id == "b");
}

TEST_CASE("upsert replaces and normalizes") {
  VectorStore store(2);
  store.upsert({"a", "old", EmbeddingVector({3, 4})});
  CHECK(store.find("a")->vector.norm() == doctest::Approx(1.0));
  store.upsert({"a", "new", EmbeddingVector({0, 2})});
  CHECK(store.size() == 1);
  CHECK(store.find("a")->text == "new");
  CHECK(store.find("zz") == nullptr);
}

TEST_CASE("dimension and zero vector errors") {
  VectorStore store(2);
  CHECK(code_of([&] { store.upsert({"a", "", EmbeddingVector({1, 0, 0})}); }) == ErrorCode::DimMismatch);
  CHECK(code_of([&] { store.upsert({"a", "", EmbeddingVector({0, 0})}); }) == ErrorCode::ZeroVector);
  store.upsert({"a", "", EmbeddingVector({1, 0})});
  CHECK(code_of([&] { store.top_k(EmbeddingVector({1, 0, 0}), 1); }) == ErrorCode::DimMismatch);
  VectorStore empty;
  CHECK(empty.top_k(EmbeddingVector({1, 0}), 3).empty());
}

TEST_CASE("save and load round trip of 100 records") {
  testing::TempDir tmp;
  SplitMix64 rng(13);
  VectorStore store(16);
  for (std::size_t i = 0; i < 100; ++i) store.upsert({id(99 - i), "text \"" + std::to_string(i) + "\"\nđ", random_vec(rng, 16)});
  store.save(tmp / "v.jsonl");
  auto loaded = VectorStore::load(tmp / "v.jsonl");
  REQUIRE(loaded.size() == 100);
  CHECK(loaded.dim() == 16);
  for (const auto& r : store.records()) {
    const auto* l = loaded.find(r.chunk_id);
    REQUIRE(l != nullptr);
    CHECK(l->text == r.text);
    CHECK(l->vector == r.vector);
  }
  auto q = random_vec(rng, 16);
  auto a = store.top_k(q, 10), b = loaded.top_k(q, 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(a[i].chunk_id == b[i].chunk_id);
    CHECK(a[i].score == b[i].score);
  }
  // Saving again is byte-identical.
  loaded.save(tmp / "w.jsonl");
  CHECK(io::read_file(tmp / "v.jsonl") == io::read_file(tmp / "w.jsonl"));
}

TEST_CASE("corrupt store files fail with persistence errors") {
  testing::TempDir tmp;
  testing::write_text(tmp / "bad.jsonl", "{\"dim\":2,\"count\":1}\n{\"chunk_id\":\"a\",\"text\":\"\",\"vector\":[1,0,0]}\n");
  CHECK(code_of([&] { VectorStore::load(tmp / "bad.jsonl"); }) == ErrorCode::PersistenceError);
  testing::write_text(tmp / "junk.jsonl", "{\"dim\":2,\"count\":1}\nnot json\n");
  CHECK(code_of([&] { VectorStore::load(tmp / "junk.jsonl"); }) == ErrorCode::PersistenceError);
  testing::write_text(tmp / "short.jsonl", "{\"dim\":2,\"count\":2}\n{\"chunk_id\":\"a\",\"text\":\"\",\"vector\":[1,0]}\n");
  CHECK(code_of([&] { VectorStore::load(tmp / "short.jsonl"); }) == ErrorCode::PersistenceError);
  testing::write_text(tmp / "empty.jsonl", "");
  CHECK(VectorStore::load(tmp / "empty.jsonl").empty());
}
