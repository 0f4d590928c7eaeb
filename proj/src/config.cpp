#include "catrag/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>
#include <sstream>

#include "catrag/io_util.hpp"

namespace catrag {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string env_name(const std::string& key) {
  std::string out = "CATRAG_";
  for (char c : key) {
    out.push_back((c == '.' || c == '-') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "corpus", "graph", "vstore", "router_model", "dictionary", "gazetteer", "stopwords", "request_log",
      "chunk.size", "chunk.overlap", "chunk.snap",
      "embed.kind", "embed.dim", "embed.seed", "embed.base_url", "embed.timeout_ms", "embed.batch_size",
      "embed.max_in_flight", "embed.max_retries",
      "gen.kind", "gen.base_url", "gen.model", "gen.api_key_env", "gen.temperature", "gen.timeout_ms",
      "gen.max_retries", "gen.max_context_chars", "gen.relation_cap", "gen.rps",
      "ner.kind", "ner.base_url", "ner.timeout_ms", "ner.max_retries",
      "query.k_vec", "query.k_graph", "query.sim_threshold", "query.min_vec_score",
      "server.host", "server.port", "server.max_concurrent_queries", "server.max_generations",
      "server.cors_origin"};
  return keys;
}

class Values {
 public:
  Values(std::map<std::string, std::string> values, fs::path base) : values_(std::move(values)), base_(std::move(base)) {}

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  void str(const std::string& key, std::string& out) const {
    if (auto v = get(key)) out = *v;
  }

  void path(const std::string& key, fs::path& out) const {
    if (auto v = get(key); v && !v->empty()) {
      fs::path p(*v);
      out = p.is_absolute() ? p : base_ / p;
    }
  }

  template <typename T>
  void number(const std::string& key, T& out) const {
    auto v = get(key);
    if (!v) return;
    std::istringstream is(*v);
    T parsed{};
    if (!(is >> parsed) || !(is >> std::ws).eof()) {
      throw Error(ErrorCode::ConfigError, "config key '" + key + "': '" + *v + "' is not a valid number");
    }
    out = parsed;
  }

  void boolean(const std::string& key, bool& out) const {
    auto v = get(key);
    if (!v) return;
    if (*v == "true" || *v == "1" || *v == "yes") {
      out = true;
    } else if (*v == "false" || *v == "0" || *v == "no") {
      out = false;
    } else {
      throw Error(ErrorCode::ConfigError, "config key '" + key + "': expected true/false");
    }
  }

 private:
  std::map<std::string, std::string> values_;
  fs::path base_;
};

void require_file(const char* key, const fs::path& path, bool required) {
  if (path.empty()) {
    if (required) throw Error(ErrorCode::ConfigError, std::string("config key '") + key + "' is required");
    return;
  }
  std::error_code ec;
  if (!fs::exists(path, ec)) {
    throw Error(ErrorCode::ConfigError, std::string("config key '") + key + "': no such file " + path.string());
  }
}

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

EngineConfig EngineConfig::load(const fs::path& path) {
  return parse(io::read_file(path), path.has_parent_path() ? path.parent_path() : fs::path("."), process_env);
}

EngineConfig EngineConfig::parse(const std::string& text, const fs::path& base_dir, const EnvLookup& env) {
  std::map<std::string, std::string> raw;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    if (key == "gen.api_key") {
      throw Error(ErrorCode::ConfigError, "API keys are read from the environment only; set gen.api_key_env");
    }
    if (!known_keys().contains(key)) {
      throw Error(ErrorCode::ConfigError, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    raw[key] = trim(line.substr(eq + 1));
  }
  if (env) {
    for (const auto& key : known_keys()) {
      if (auto v = env(env_name(key))) raw[key] = *v;
    }
  }

  const Values v(std::move(raw), base_dir);
  EngineConfig c;
  v.path("corpus", c.corpus);
  v.path("graph", c.graph);
  v.path("vstore", c.vstore);
  v.path("router_model", c.router_model);
  v.path("dictionary", c.dictionary);
  v.path("gazetteer", c.gazetteer);
  v.path("stopwords", c.stopwords);
  if (auto log = v.get("request_log")) {
    fs::path p;
    v.path("request_log", p);
    c.request_log = (*log == "-" || log->empty()) ? *log : p.string();
  }

  v.number("chunk.size", c.chunking.size);
  v.number("chunk.overlap", c.chunking.overlap);
  v.boolean("chunk.snap", c.chunking.snap_to_whitespace);

  if (auto kind = v.get("embed.kind")) {
    if (*kind == "stub") c.embedding.kind = EmbeddingProviderConfig::Kind::Stub;
    else if (*kind == "http") c.embedding.kind = EmbeddingProviderConfig::Kind::Http;
    else throw Error(ErrorCode::ConfigError, "config key 'embed.kind': expected stub or http");
  }
  v.number("embed.dim", c.embedding.dim);
  v.number("embed.seed", c.embedding.seed);
  v.str("embed.base_url", c.embedding.base_url);
  v.number("embed.timeout_ms", c.embedding.timeout_ms);
  v.number("embed.batch_size", c.embedding.batch_size);
  v.number("embed.max_in_flight", c.embedding.max_in_flight);
  v.number("embed.max_retries", c.embedding.max_retries);

  if (auto kind = v.get("gen.kind")) {
    if (*kind == "stub") c.generation.kind = GenProviderConfig::Kind::Stub;
    else if (*kind == "http") c.generation.kind = GenProviderConfig::Kind::Http;
    else throw Error(ErrorCode::ConfigError, "config key 'gen.kind': expected stub or http");
  }
  v.str("gen.base_url", c.generation.base_url);
  v.str("gen.model", c.generation.model_name);
  v.str("gen.api_key_env", c.generation.api_key_env);
  v.number("gen.temperature", c.generation.temperature);
  v.number("gen.timeout_ms", c.generation.timeout_ms);
  v.number("gen.max_retries", c.generation.max_retries);
  v.number("gen.max_context_chars", c.generation.max_context_chars);
  v.number("gen.relation_cap", c.generation.relation_cap);
  v.number("gen.rps", c.generation.requests_per_second);

  if (auto kind = v.get("ner.kind")) {
    if (*kind == "http") {
      c.ner = NerProviderConfig{};
      v.str("ner.base_url", c.ner->base_url);
      v.number("ner.timeout_ms", c.ner->timeout_ms);
      v.number("ner.max_retries", c.ner->max_retries);
      if (c.ner->base_url.empty()) throw Error(ErrorCode::ConfigError, "config key 'ner.base_url' is required for ner.kind = http");
    } else if (*kind != "heuristic") {
      throw Error(ErrorCode::ConfigError, "config key 'ner.kind': expected heuristic or http");
    }
  }

  v.number("query.k_vec", c.query.k_vec);
  v.number("query.k_graph", c.query.k_graph);
  v.number("query.sim_threshold", c.query.sim_threshold);
  v.number("query.min_vec_score", c.query.min_vec_score);
  c.query.max_context_chars = c.generation.max_context_chars;

  v.str("server.host", c.server.host);
  v.number("server.port", c.server.port);
  v.number("server.max_concurrent_queries", c.server.max_concurrent_queries);
  v.number("server.max_generations", c.server.max_generations);
  v.str("server.cors_origin", c.server.cors_origin);

  c.embedding.validate();
  c.generation.validate();
  c.query.validate();
  if (c.chunking.size == 0 || c.chunking.overlap >= c.chunking.size) {
    throw Error(ErrorCode::ConfigError, "config keys 'chunk.size'/'chunk.overlap': overlap must be below size");
  }
  if (c.server.max_concurrent_queries == 0 || c.server.max_generations == 0) {
    throw Error(ErrorCode::ConfigError, "server concurrency caps must be positive");
  }
  return c;
}

void EngineConfig::require_serving_files() const {
  require_file("graph", graph, true);
  require_file("vstore", vstore, true);
  require_file("router_model", router_model, true);
  require_file("dictionary", dictionary, false);
  require_file("gazetteer", gazetteer, false);
  require_file("stopwords", stopwords, false);
}

void EngineConfig::require_construct_files() const {
  require_file("corpus", corpus, true);
  require_file("router_model", router_model, true);
  require_file("dictionary", dictionary, false);
  require_file("gazetteer", gazetteer, false);
  require_file("stopwords", stopwords, false);
  if (graph.empty()) throw Error(ErrorCode::ConfigError, "config key 'graph' is required");
  if (vstore.empty()) throw Error(ErrorCode::ConfigError, "config key 'vstore' is required");
}

Resources load_resources(const EngineConfig& config) {
  Resources r;
  if (!config.dictionary.empty()) r.dictionary = AbbreviationDictionary::load(config.dictionary);
  if (!config.stopwords.empty()) r.stopwords = load_stopwords(config.stopwords);
  if (!config.gazetteer.empty()) r.gazetteer = load_gazetteer(config.gazetteer);
  return r;
}

Providers make_providers(const EngineConfig& config, const Resources& resources) {
  Providers p;
  p.embedder = make_embedding_provider(config.embedding);
  p.generator = std::make_shared<BoundedGenerator>(make_generation_provider(config.generation),
                                                   config.server.max_generations);
  if (config.ner) {
    p.ner = std::make_shared<HttpExtractor>(*config.ner, resources.gazetteer);
  } else {
    p.ner = std::make_shared<HeuristicExtractor>(resources.gazetteer);
  }
  return p;
}

Engine open_engine(const EngineConfig& config) {
  config.require_serving_files();
  auto resources = load_resources(config);
  auto providers = make_providers(config, resources);
  auto store = VectorStore::load(config.vstore);
  if (!store.empty() && store.dim() != providers.embedder->dim()) {
    throw Error(ErrorCode::ConfigError, "config key 'embed.dim' (" + std::to_string(providers.embedder->dim()) +
                                            ") does not match vstore dim " + std::to_string(store.dim()));
  }
  return Engine(RegulationGraph::load(config.graph), std::move(store), RouterModel::load(config.router_model),
                std::move(resources), std::move(providers));
}

}  // namespace catrag
