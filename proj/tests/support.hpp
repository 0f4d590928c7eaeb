#pragma once
// Helpers shared by the unit and acceptance tests.

#include <atomic>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <unistd.h>

#include "catrag/catrag.hpp"
#include "catrag/config.hpp"
#include "catrag/io_util.hpp"

namespace testing {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(CATRAG_DATA_DIR); }
inline fs::path toy_dir() { return data_dir() / "toy"; }

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("catrag_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& body) {
  fs::create_directories(p.parent_path());
  catrag::io::write_file_atomic(p, body);
}

// Toy config rewritten so graph, vstore and router model land in `out`.
inline catrag::EngineConfig toy_config(const fs::path& out) {
  auto cfg = catrag::EngineConfig::parse(catrag::io::read_file(toy_dir() / "engine.cfg"), toy_dir(), {});
  cfg.graph = out / "graph.jsonl";
  cfg.vstore = out / "vstore.jsonl";
  cfg.router_model = out / "router.bin";
  return cfg;
}

// Trains the toy router on all labels and builds graph + store into `out`.
inline catrag::EngineConfig build_toy(const fs::path& out, std::uint64_t seed = 7) {
  auto cfg = toy_config(out);
  auto examples = catrag::load_training_data(toy_dir() / "labels.jsonl");
  catrag::TrainConfig tc;
  tc.seed = seed;
  auto router = catrag::RouterModel::train(examples, tc);
  router.save(cfg.router_model);
  auto docs = catrag::load_corpus(cfg.corpus);
  auto resources = catrag::load_resources(cfg);
  auto providers = catrag::make_providers(cfg, resources);
  auto built = catrag::construct(docs, cfg.chunking, router, resources, providers);
  catrag::persist(built, cfg.graph, cfg.vstore);
  return cfg;
}

}  // namespace testing
