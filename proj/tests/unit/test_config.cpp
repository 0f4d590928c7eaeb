#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "catrag/config.hpp"
#include "catrag/error.hpp"
#include "support.hpp"

using namespace catrag;
namespace fs = std::filesystem;

namespace {

Error error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  FAIL("no error raised");
  return Error(ErrorCode::IoError, "");
}

EngineConfig::EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const std::string& k) -> std::optional<std::string> {
    auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

}  // namespace

TEST_CASE("defaults without any keys") {
  auto c = EngineConfig::parse("", "/base", {});
  CHECK(c.query.k_vec == 5);
  CHECK(c.query.k_graph == 5);
  CHECK(c.query.sim_threshold == doctest::Approx(0.7));
  CHECK(c.chunking.size == 1000);
  CHECK(c.chunking.overlap == 200);
  CHECK(c.embedding.dim == 768);
  CHECK(c.server.max_generations == 8);
  CHECK(!c.ner);
}

TEST_CASE("keys, comments and relative paths") {
  auto c = EngineConfig::parse(
      "# comment\n"
      "graph = out/g.jsonl\n"
      "vstore=/abs/v.jsonl\n"
      "query.k_vec = 3\n"
      "query.sim_threshold = 0.5\n"
      "chunk.snap = false\n"
      "ner.kind = http\n"
      "ner.base_url = http://ner:9000/extract\n"
      "gen.kind = http\n"
      "gen.base_url = http://llm/v1\n"
      "gen.model = m\n"
      "server.port = 9090\n",
      "/base", {});
  CHECK(c.graph == fs::path("/base/out/g.jsonl"));
  CHECK(c.vstore == fs::path("/abs/v.jsonl"));
  CHECK(c.query.k_vec == 3);
  CHECK(c.query.sim_threshold == doctest::Approx(0.5));
  CHECK(!c.chunking.snap_to_whitespace);
  REQUIRE(c.ner);
  CHECK(c.ner->base_url == "http://ner:9000/extract");
  CHECK(c.generation.kind == GenProviderConfig::Kind::Http);
  CHECK(c.server.port == 9090);
}

TEST_CASE("environment overrides file values") {
  auto c = EngineConfig::parse("query.k_vec = 3\nserver.port = 1\n", "/b",
                               env_of({{"CATRAG_QUERY_K_VEC", "9"}, {"CATRAG_SERVER_HOST", "0.0.0.0"}}));
  CHECK(c.query.k_vec == 9);
  CHECK(c.server.port == 1);
  CHECK(c.server.host == "0.0.0.0");
}

TEST_CASE("bad configs name the offending key") {
  auto unknown = error_of([] { EngineConfig::parse("bogus = 1\n", "/", {}); });
  CHECK(unknown.code() == ErrorCode::ConfigError);
  CHECK(std::string(unknown.what()).find("bogus") != std::string::npos);
  auto number = error_of([] { EngineConfig::parse("query.k_vec = five\n", "/", {}); });
  CHECK(std::string(number.what()).find("query.k_vec") != std::string::npos);
  auto key = error_of([] { EngineConfig::parse("gen.api_key = sk-123\n", "/", {}); });
  CHECK(key.code() == ErrorCode::ConfigError);
  CHECK(error_of([] { EngineConfig::parse("no equals sign\n", "/", {}); }).code() == ErrorCode::ConfigError);
  CHECK(error_of([] { EngineConfig::parse("query.sim_threshold = 1.5\n", "/", {}); }).code() == ErrorCode::ConfigError);
  CHECK(error_of([] { EngineConfig::parse("chunk.size = 10\nchunk.overlap = 10\n", "/", {}); }).code() ==
        ErrorCode::ConfigError);
  CHECK(error_of([] { EngineConfig::parse("embed.kind = magic\n", "/", {}); }).code() == ErrorCode::ConfigError);
  CHECK(error_of([] { EngineConfig::parse("embed.kind = http\n", "/", {}); }).code() == ErrorCode::ConfigError);
}

TEST_CASE("missing files fail fast naming the key") {
  testing::TempDir tmp;
  testing::write_text(tmp / "g.jsonl", "");
  auto c = EngineConfig::parse("graph = g.jsonl\nvstore = missing.jsonl\nrouter_model = m.bin\n", tmp.path(), {});
  auto e = error_of([&] { c.require_serving_files(); });
  CHECK(e.code() == ErrorCode::ConfigError);
  CHECK(std::string(e.what()).find("'vstore'") != std::string::npos);
  auto none = EngineConfig::parse("", tmp.path(), {});
  CHECK(std::string(error_of([&] { none.require_serving_files(); }).what()).find("'graph'") != std::string::npos);
  CHECK(std::string(error_of([&] { none.require_construct_files(); }).what()).find("'corpus'") != std::string::npos);
}

TEST_CASE("the bundled toy config loads") {
  auto c = EngineConfig::load(testing::toy_dir() / "engine.cfg");
  CHECK(c.chunking.size == 280);
  CHECK(c.embedding.kind == EmbeddingProviderConfig::Kind::Stub);
  CHECK(c.query.min_vec_score == doctest::Approx(0.75));
  CHECK(fs::exists(c.corpus));
  CHECK_NOTHROW(load_resources(c));
}

TEST_CASE("open_engine rejects a store built with another dimension") {
  testing::TempDir tmp;
  auto cfg = testing::build_toy(tmp.path());
  cfg.embedding.dim = 64;
  CHECK(error_of([&] { open_engine(cfg); }).code() == ErrorCode::ConfigError);
}
