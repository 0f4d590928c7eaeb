#pragma once

#include <memory>
#include <string>

#include "catrag/catrag.hpp"
#include "catrag/config.hpp"

namespace catrag {

/// JSON HTTP API over a frozen engine:
///   GET  /api/health, /api/categories, /api/graph/stats,
///        /api/graph/neighbors?entity=&limit=
///   POST /api/classify {"text"}, /api/query {"query", "k_vec"?, "k_graph"?,
///        "sim_threshold"?, "mode"?}
/// Errors use {"error": {"code", "message"}}.
class Service {
 public:
  Service(std::shared_ptr<const Engine> engine, EngineConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Blocks until stop().
  bool listen();
  /// Binds to an ephemeral port on host; returns it, or -1.
  int bind_any_port(const std::string& host = "127.0.0.1");
  /// Serves after bind_any_port; blocks until stop().
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace catrag
