#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "catrag/catrag.hpp"

namespace catrag {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_concurrent_queries = 16;
  std::size_t max_generations = 8;
  std::string cors_origin = "*";
};

/// Flat `key = value` configuration. Relative paths resolve against the
/// config file's directory. Environment variables CATRAG_<KEY> (dots and
/// dashes as underscores, upper case) override file values.
struct EngineConfig {
  std::filesystem::path corpus;
  std::filesystem::path graph;
  std::filesystem::path vstore;
  std::filesystem::path router_model;
  std::filesystem::path dictionary;
  std::filesystem::path gazetteer;
  std::filesystem::path stopwords;
  std::string request_log;  // path, "-" for stderr, empty to disable

  ChunkOptions chunking;
  EmbeddingProviderConfig embedding;
  GenProviderConfig generation;
  std::optional<NerProviderConfig> ner;  // unset → heuristic extractor
  QueryConfig query;
  ServerConfig server;

  using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

  static EngineConfig load(const std::filesystem::path& path);
  static EngineConfig parse(const std::string& text, const std::filesystem::path& base_dir,
                            const EnvLookup& env);

  /// Fails with ConfigError naming the first missing key/file among those
  /// needed to serve queries.
  void require_serving_files() const;
  /// Same for building (corpus and router model).
  void require_construct_files() const;
};

/// Environment lookup backed by getenv.
std::optional<std::string> process_env(const std::string& name);

Resources load_resources(const EngineConfig& config);
Providers make_providers(const EngineConfig& config, const Resources& resources);

/// Loads graph, store and router named by the config and wires providers.
Engine open_engine(const EngineConfig& config);

}  // namespace catrag
