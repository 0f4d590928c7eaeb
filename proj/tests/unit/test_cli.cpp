#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(CATRAG_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Toy config whose outputs land in `dir`.
fs::path write_config(const testing::TempDir& dir, const std::string& extra = "") {
  const auto toy = testing::toy_dir();
  std::string body = "corpus = " + (toy / "corpus").string() + "\n" +
                     "graph = " + (dir / "graph.jsonl").string() + "\n" +
                     "vstore = " + (dir / "vstore.jsonl").string() + "\n" +
                     "router_model = " + (dir / "router.bin").string() + "\n" +
                     "dictionary = " + (toy / "dict.json").string() + "\n" +
                     "gazetteer = " + (toy / "gazetteer.txt").string() + "\n" +
                     "stopwords = " + (toy / "stopwords.txt").string() + "\n" +
                     "chunk.size = 280\nchunk.overlap = 40\n"
                     "embed.kind = stub\nembed.dim = 768\ngen.kind = stub\n"
                     "query.sim_threshold = 0.7\nquery.min_vec_score = 0.75\n" +
                     extra;
  const auto path = dir / "engine.cfg";
  testing::write_text(path, body);
  return path;
}

fs::path labels() { return testing::toy_dir() / "labels.jsonl"; }

}  // namespace

TEST_CASE("ingest writes one line per chunk") {
  testing::TempDir dir;
  const auto out = dir / "chunks.jsonl";
  auto r = run("ingest --corpus " + q(testing::toy_dir() / "corpus") + " --out " + q(out) + " --dict " +
               q(testing::toy_dir() / "dict.json") + " --size 280 --overlap 40");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("3 documents, 12 chunks") != std::string::npos);
  const auto body = catrag::io::read_file(out);
  CHECK(std::count(body.begin(), body.end(), '\n') == 12);
  auto first = nlohmann::json::parse(body.substr(0, body.find('\n')));
  CHECK(first.contains("chunk_id"));
  CHECK(first.contains("norm_text"));
}

TEST_CASE("train, construct and query end to end") {
  testing::TempDir dir;
  const auto cfg = write_config(dir);
  auto t = run("train-router --data " + q(labels()) + " --split 1.0 --out " + q(dir / "router.bin"));
  CHECK(t.code == 7);
  CHECK(t.out.find("SplitInvalid") != std::string::npos);

  t = run("train-router --data " + q(labels()) + " --split 0.75 --seed 3 --out " + q(dir / "router.bin"));
  REQUIRE(t.code == 0);
  CHECK(t.out.find("train=36 test=12") != std::string::npos);

  auto c = run("construct --config " + q(cfg));
  REQUIRE(c.code == 0);
  CHECK(fs::exists(dir / "graph.jsonl"));
  CHECK(fs::exists(dir / "vstore.jsonl"));

  auto a = run("query --config " + q(cfg) + " 'How many weeks does each semester last, and who publishes the academic calendar?'");
  REQUIRE(a.code == 0);
  CHECK(a.out.rfind("Based on", 0) == 0);
  CHECK(a.out.find("timings (ms)") != std::string::npos);

  auto j = run("query --json --mode rag --config " + q(cfg) + " 'How many weeks does each semester last, and who publishes the academic calendar?'");
  REQUIRE(j.code == 0);
  auto parsed = nlohmann::json::parse(j.out);
  CHECK(parsed["mode"] == "rag");
  CHECK(parsed["graph_hits"].empty());
  CHECK(!parsed["vec_hits"].empty());

  auto e = run("query --config " + q(cfg) + " '   '");
  CHECK(e.code == 9);
  CHECK(e.out.find("EmptyQuery") != std::string::npos);
}

TEST_CASE("construct with a missing router model names the key") {
  testing::TempDir dir;
  const auto cfg = write_config(dir);
  auto c = run("construct --config " + q(cfg));
  CHECK(c.code == 10);
  CHECK(c.out.find("router_model") != std::string::npos);
}

TEST_CASE("eval qa prints the paired table") {
  testing::TempDir dir;
  const auto cfg = write_config(dir);
  REQUIRE(run("train-router --data " + q(labels()) + " --out " + q(dir / "router.bin")).code == 0);
  REQUIRE(run("construct --config " + q(cfg)).code == 0);
  auto r = run("eval qa --config " + q(cfg) + " --items " + q(testing::toy_dir() / "qa.jsonl") +
               " --mode both --thresholds 0.6,0.8 --csv " + q(dir / "report.csv"));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("CR | R") != std::string::npos);
  CHECK(r.out.find("0/0/0") != std::string::npos);
  CHECK(r.out.find("best F1 threshold") != std::string::npos);
  CHECK(fs::exists(dir / "report.csv"));
}

TEST_CASE("eval router compares against the majority baseline") {
  auto r = run("eval router --data " + q(labels()) + " --split 0.75 --seed 3");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Majority") != std::string::npos);
  CHECK(r.out.find("fastText-style") != std::string::npos);
  CHECK(r.out.find("tuition") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("").code == 2);
  CHECK(run("query --mode nope --config /nonexistent x").code == 2);
  CHECK(run("train-router --data " + q(labels())).code == 2);
  CHECK(run("--help").code == 0);
}
