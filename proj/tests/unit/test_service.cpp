#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "catrag/config.hpp"
#include "catrag/error.hpp"
#include "catrag/service.hpp"
#include "support.hpp"

using namespace catrag;
using json = nlohmann::json;

namespace {

class Running {
 public:
  Running(std::shared_ptr<const Engine> engine, EngineConfig cfg) : service(std::move(engine), std::move(cfg)) {
    port = service.bind_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { service.listen_after_bind(); });
    service.wait_until_ready();
  }
  ~Running() {
    service.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(10, 0);
    return c;
  }
  Service service;
  int port = 0;
  std::thread thread;
};

json post(const Running& s, const std::string& path, const json& body, int* status) {
  auto c = s.client();
  auto res = c.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  if (status) *status = res->status;
  return json::parse(res->body);
}

json get(const Running& s, const std::string& path, int* status) {
  auto c = s.client();
  auto res = c.Get(path);
  REQUIRE(res);
  if (status) *status = res->status;
  return json::parse(res->body);
}

class Delayed final : public GenerationProvider {
 public:
  Delayed(std::shared_ptr<const GenerationProvider> inner, int ms, bool fail = false)
      : inner_(std::move(inner)), ms_(ms), fail_(fail) {}
  RelationExtraction extract_relations(std::string_view t, const std::vector<Entity>& e, const std::string& c) const override {
    return inner_->extract_relations(t, e, c);
  }
  std::string generate(std::string_view q, const AssembledContext& ctx) const override {
    std::this_thread::sleep_for(std::chrono::milliseconds(ms_));
    if (fail_) throw Error(ErrorCode::GenerationUnavailable, "provider down");
    return inner_->generate(q, ctx);
  }

 private:
  std::shared_ptr<const GenerationProvider> inner_;
  int ms_;
  bool fail_;
};

struct Toy {
  testing::TempDir tmp;
  EngineConfig cfg = testing::build_toy(tmp.path());

  std::shared_ptr<const Engine> engine(std::shared_ptr<const GenerationProvider> gen = nullptr) const {
    auto resources = load_resources(cfg);
    auto providers = make_providers(cfg, resources);
    if (gen) providers.generator = std::move(gen);
    return std::make_shared<const Engine>(RegulationGraph::load(cfg.graph), VectorStore::load(cfg.vstore),
                                          RouterModel::load(cfg.router_model), std::move(resources), providers);
  }
};

// Graph with chunk1 {a,b} and chunk2 {b,c}, one stub relation each.
std::shared_ptr<const Engine> two_chunk_engine() {
  RegulationGraph g;
  VectorStore store(64);
  struct Fixture {
    std::string id, text;
    std::vector<std::string> names;
  };
  const std::vector<Fixture> chunks{{"chunk1", "a meets b.", {"a", "b"}}, {"chunk2", "b meets c.", {"b", "c"}}};
  StubGenerator stub;
  for (const auto& [id, text, names] : chunks) {
    Chunk c;
    c.chunk_id = id;
    c.doc_id = "d";
    c.text = text;
    g.attach_chunk(c, "rules");
    std::vector<Entity> es;
    for (const auto& n : names) es.push_back({n, n, id});
    for (const auto& e : es) g.add_mention(id, e);
    for (auto& t : stub.extract_relations(text, es, id).triplets) g.add_relation(t);
    store.upsert({id, text, stub_embed(text, 0, 64)});
  }
  std::vector<TrainingExample> ex{{"a b", "rules"}, {"x y", "misc"}};
  Providers p{std::make_shared<StubEmbedder>(0, 64), std::make_shared<StubGenerator>(), std::make_shared<HeuristicExtractor>(std::vector<std::string>{})};
  return std::make_shared<const Engine>(std::move(g), std::move(store), RouterModel::train(ex, {}), Resources{}, p);
}

}  // namespace

TEST_CASE("health, stats and categories") {
  Toy toy;
  Running s(toy.engine(), toy.cfg);
  int status = 0;
  auto h = get(s, "/api/health", &status);
  CHECK(status == 200);
  CHECK(h["status"] == "ok");
  CHECK(h["vstore"]["count"] == 12);
  CHECK(h["vstore"]["dim"] == 768);
  CHECK(h["graph"]["chunks"] == 12);
  auto stats = get(s, "/api/graph/stats", &status);
  CHECK(stats == h["graph"]);
  auto cats = get(s, "/api/categories", &status);
  std::size_t total = 0;
  for (const auto& c : cats["categories"]) total += c["chunks"].get<std::size_t>();
  CHECK(total == 12);
}

TEST_CASE("classify returns a distribution") {
  Toy toy;
  Running s(toy.engine(), toy.cfg);
  int status = 0;
  auto r = post(s, "/api/classify", {{"text", "tuition refund"}}, &status);
  CHECK(status == 200);
  CHECK(r["label"] == "tuition");
  double sum = 0;
  for (const auto& d : r["distribution"]) sum += d["probability"].get<double>();
  CHECK(sum == doctest::Approx(1.0));
  post(s, "/api/classify", {{"txt", "x"}}, &status);
  CHECK(status == 400);
}

TEST_CASE("query endpoint contract") {
  Toy toy;
  Running s(toy.engine(), toy.cfg);
  int status = 0;
  auto r = post(s, "/api/query", {{"query", "how much tuition per credit"}, {"sim_threshold", 0.0}}, &status);
  CHECK(status == 200);
  CHECK(r["answer"].get<std::string>().rfind("Based on", 0) == 0);
  CHECK(r.contains("label"));
  CHECK(!r["graph_hits"].empty());
  CHECK(r["timings"]["total_ms"].get<double>() > 0);
  CHECK(r["vec_hits"][0].contains("score"));

  auto rag = post(s, "/api/query", {{"query", "how much tuition per credit"}, {"mode", "rag"}, {"sim_threshold", 0.0}}, &status);
  CHECK(status == 200);
  CHECK(rag["graph_hits"].empty());
  CHECK(rag["entities"].empty());
  CHECK(rag["relations"].empty());
}

TEST_CASE("relevance floor refuses off-topic questions") {
  Toy toy;
  Running s(toy.engine(), toy.cfg);
  int status = 0;
  auto r = post(s, "/api/query", {{"query", "what temperature does water boil at"}}, &status);
  CHECK(status == 200);
  CHECK(r["answer"] == kRefusal);
  CHECK(r["vec_hits"].empty());
}

TEST_CASE("query endpoint errors") {
  Toy toy;
  Running s(toy.engine(), toy.cfg);
  int status = 0;
  auto e = post(s, "/api/query", {{"query", "   "}}, &status);
  CHECK(status == 422);
  CHECK(e["error"]["code"] == "EmptyQuery");
  e = post(s, "/api/query", {{"query", "x"}, {"k_vec", 0}}, &status);
  CHECK(status == 400);
  CHECK(e["error"]["message"].get<std::string>().find("k_vec") != std::string::npos);
  e = post(s, "/api/query", {{"query", "x"}, {"sim_threshold", 2}}, &status);
  CHECK(status == 400);
  e = post(s, "/api/query", {{"query", "x"}, {"mode", "graph"}}, &status);
  CHECK(status == 400);
  e = post(s, "/api/query", {{"q", "x"}}, &status);
  CHECK(status == 400);
  auto c = s.client();
  auto raw = c.Post("/api/query", "{not json", "application/json");
  REQUIRE(raw);
  CHECK(raw->status == 400);
  CHECK(json::parse(raw->body).contains("error"));
  auto missing = c.Get("/api/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["error"]["code"] == "NotFound");
}

TEST_CASE("generation failure returns 503 with evidence") {
  Toy toy;
  auto cfg = toy.cfg;
  cfg.query.min_vec_score = -1.0;
  Running s(toy.engine(std::make_shared<Delayed>(std::make_shared<StubGenerator>(), 0, true)), cfg);
  int status = 0;
  auto e = post(s, "/api/query", {{"query", "tuition refund"}, {"sim_threshold", 0.0}}, &status);
  CHECK(status == 503);
  CHECK(e["error"]["code"] == "GenerationUnavailable");
  CHECK(!e["result"]["vec_hits"].empty());
}

TEST_CASE("concurrent query cap answers 429") {
  Toy toy;
  auto cfg = toy.cfg;
  cfg.server.max_concurrent_queries = 1;
  cfg.query.min_vec_score = -1.0;
  Running s(toy.engine(std::make_shared<Delayed>(std::make_shared<StubGenerator>(), 400)), cfg);
  std::vector<int> statuses(4, 0);
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&, i] {
      auto c = s.client();
      auto res = c.Post("/api/query", json{{"query", "tuition"}}.dump(), "application/json");
      statuses[i] = res ? res->status : -1;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(std::count(statuses.begin(), statuses.end(), 200) >= 1);
  CHECK(std::count(statuses.begin(), statuses.end(), 429) >= 1);
}

TEST_CASE("neighbors on the two-chunk graph") {
  auto engine = two_chunk_engine();
  REQUIRE(engine->graph().all_relations().size() == 2);
  Running s(engine, EngineConfig{});
  int status = 0;
  auto r = get(s, "/api/graph/neighbors?entity=b", &status);
  CHECK(status == 200);
  CHECK(r["known"] == true);
  REQUIRE(r["relations"].size() == 2);
  CHECK(r["relations"][0]["subject"] == "a");
  CHECK(r["relations"][0]["object"] == "b");
  CHECK(r["relations"][0]["chunk_id"] == "chunk1");
  CHECK(r["relations"][1]["subject"] == "b");
  CHECK(r["relations"][1]["object"] == "c");
  auto a = get(s, "/api/graph/neighbors?entity=A&limit=5", &status);
  CHECK(a["relations"].size() == 1);
  CHECK(get(s, "/api/graph/neighbors?entity=b&limit=1", &status)["relations"].size() == 1);
  get(s, "/api/graph/neighbors", &status);
  CHECK(status == 400);
  get(s, "/api/graph/neighbors?entity=b&limit=0", &status);
  CHECK(status == 400);
  auto unknown = get(s, "/api/graph/neighbors?entity=zzz", &status);
  CHECK(unknown["known"] == false);
  CHECK(unknown["relations"].empty());
}

TEST_CASE("cors headers and preflight") {
  Toy toy;
  auto cfg = toy.cfg;
  cfg.server.cors_origin = "http://ui.local";
  Running s(toy.engine(), cfg);
  auto c = s.client();
  auto res = c.Get("/api/health");
  REQUIRE(res);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "http://ui.local");
  auto pre = c.Options("/api/query");
  REQUIRE(pre);
  CHECK(pre->status == 204);
}

TEST_CASE("stores are unchanged by a query storm and requests are logged") {
  Toy toy;
  auto cfg = toy.cfg;
  cfg.request_log = (toy.tmp / "requests.jsonl").string();
  auto engine = toy.engine();
  const auto before_graph = engine->graph().serialize();
  const auto before_model = engine->router().serialize();
  const auto before_graph_file = io::read_file(cfg.graph);
  const auto before_store_file = io::read_file(cfg.vstore);
  {
    Running s(engine, cfg);
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&, t] {
        auto c = s.client();
        for (int i = 0; i < 10; ++i) {
          json body{{"query", "question " + std::to_string(t * 10 + i) + " about tuition and credits"},
                    {"sim_threshold", 0.1 * (i % 10)}};
          auto res = c.Post("/api/query", body.dump(), "application/json");
          if (res && res->status == 200) ++ok;
        }
      });
    }
    for (auto& th : threads) th.join();
    CHECK(ok == 40);
  }
  CHECK(engine->graph().serialize() == before_graph);
  CHECK(engine->router().serialize() == before_model);
  testing::TempDir after;
  engine->store().save(after / "v.jsonl");
  CHECK(io::read_file(after / "v.jsonl") == before_store_file);
  CHECK(io::read_file(cfg.graph) == before_graph_file);

  std::ifstream log(cfg.request_log);
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    auto j = json::parse(line);
    CHECK(j.contains("timings"));
    ++lines;
  }
  CHECK(lines == 40);
}
