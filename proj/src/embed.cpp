#include "catrag/embed.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <semaphore>

#include <nlohmann/json.hpp>

#include "catrag/error.hpp"
#include "catrag/hash.hpp"
#include "catrag/http_util.hpp"
#include "catrag/text.hpp"

namespace catrag {

using nlohmann::json;

double EmbeddingVector::norm() const noexcept {
  double sum = 0.0;
  for (float v : values_) sum += static_cast<double>(v) * v;
  return std::sqrt(sum);
}

EmbeddingVector EmbeddingVector::normalized() const {
  const double n = norm();
  if (n == 0.0 || !std::isfinite(n)) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  std::vector<float> out(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    out[i] = static_cast<float>(values_[i] / n);
  }
  return EmbeddingVector(std::move(out));
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimMismatch,
                "dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += static_cast<double>(av[i]) * bv[i];
    na += static_cast<double>(av[i]) * av[i];
    nb += static_cast<double>(bv[i]) * bv[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void EmbeddingProviderConfig::validate() const {
  if (dim < 2) throw Error(ErrorCode::ConfigError, "embedding dim must be >= 2");
  if (kind == Kind::Http && base_url.empty()) {
    throw Error(ErrorCode::ConfigError, "http embedding provider requires base_url");
  }
  if (timeout_ms <= 0 || batch_size == 0 || max_in_flight == 0) {
    throw Error(ErrorCode::ConfigError, "embedding timeout, batch size and in-flight cap must be positive");
  }
}

std::vector<EmbeddingVector> embed_texts(const EmbeddingProvider& provider,
                                         std::span<const std::string> texts) {
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) {
      throw Error(ErrorCode::EmptyText, "cannot embed empty text at index " + std::to_string(i));
    }
  }
  auto vectors = provider.embed(texts);
  if (vectors.size() != texts.size()) {
    throw Error(ErrorCode::ProviderContract, "provider returned " + std::to_string(vectors.size()) +
                                                 " vectors for " + std::to_string(texts.size()) + " texts");
  }
  for (auto& v : vectors) {
    if (v.dim() != provider.dim()) {
      throw Error(ErrorCode::ProviderContract, "provider returned dim " + std::to_string(v.dim()) +
                                                   ", expected " + std::to_string(provider.dim()));
    }
    for (float x : v.values()) {
      if (!std::isfinite(x)) throw Error(ErrorCode::ProviderContract, "provider returned a non-finite value");
    }
    if (std::abs(v.norm() - 1.0) > 1e-6) v = v.normalized();
  }
  return vectors;
}

EmbeddingVector embed_text(const EmbeddingProvider& provider, const std::string& text) {
  return std::move(embed_texts(provider, std::span<const std::string>(&text, 1)).front());
}

EmbeddingVector stub_embed(std::string_view input, std::uint64_t seed, std::size_t dim) {
  if (input.empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
  if (dim == 0) throw Error(ErrorCode::ConfigError, "embedding dim must be positive");

  const auto cps = text::decode(text::lowercase(input));
  std::map<std::string, std::size_t> counts;
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t i = 0; i + n <= cps.size(); ++i) {
      std::string gram;
      for (std::size_t k = 0; k < n; ++k) text::append_utf8(gram, cps[i + k].value);
      ++counts[gram];
    }
  }

  const std::uint64_t seed_mix = SplitMix64(seed).next();
  std::vector<double> sum(dim, 0.0);
  std::vector<double> direction(dim);
  for (const auto& [gram, count] : counts) {
    SplitMix64 rng(fnv1a64(gram) ^ seed_mix);
    double norm2 = 0.0;
    for (auto& d : direction) {
      d = 2.0 * rng.next_unit() - 1.0;
      norm2 += d * d;
    }
    const double scale = static_cast<double>(count) / std::sqrt(norm2);
    for (std::size_t i = 0; i < dim; ++i) sum[i] += direction[i] * scale;
  }

  double norm2 = 0.0;
  for (double v : sum) norm2 += v * v;
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(sum[i] * inv);
  return EmbeddingVector(std::move(out));
}

StubEmbedder::StubEmbedder(std::uint64_t seed, std::size_t dim) : seed_(seed), dim_(dim) {
  if (dim_ < 2) throw Error(ErrorCode::ConfigError, "embedding dim must be >= 2");
}

std::vector<EmbeddingVector> StubEmbedder::embed(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(stub_embed(t, seed_, dim_));
  return out;
}

struct HttpEmbedder::Gate {
  explicit Gate(std::size_t n) : slots(static_cast<std::ptrdiff_t>(n)) {}
  std::counting_semaphore<> slots;
};

HttpEmbedder::HttpEmbedder(EmbeddingProviderConfig config)
    : config_(std::move(config)), gate_(std::make_unique<Gate>(config_.max_in_flight)) {
  config_.validate();
}

HttpEmbedder::~HttpEmbedder() = default;

std::vector<EmbeddingVector> HttpEmbedder::embed(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t begin = 0; begin < texts.size(); begin += config_.batch_size) {
    const auto batch = texts.subspan(begin, std::min(config_.batch_size, texts.size() - begin));
    const std::string body = json{{"texts", batch}}.dump();

    gate_->slots.acquire();
    http::Response res;
    try {
      res = http::post_json(config_.base_url, "/embed", body,
                            {config_.timeout_ms, config_.max_retries, {}});
    } catch (...) {
      gate_->slots.release();
      throw;
    }
    gate_->slots.release();

    if (res.status != 200) {
      throw Error(ErrorCode::ProviderContract, "embedding provider returned HTTP " + std::to_string(res.status));
    }
    try {
      const auto doc = json::parse(res.body);
      const auto dim = doc.at("dim").get<std::size_t>();
      const auto& vectors = doc.at("vectors");
      if (dim != config_.dim) {
        throw Error(ErrorCode::ProviderContract, "embedding provider dim " + std::to_string(dim) +
                                                     " != configured " + std::to_string(config_.dim));
      }
      if (!vectors.is_array() || vectors.size() != batch.size()) {
        throw Error(ErrorCode::ProviderContract, "embedding provider returned wrong vector count");
      }
      for (const auto& v : vectors) out.emplace_back(v.get<std::vector<float>>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ProviderContract, std::string("malformed embedding response: ") + e.what());
    }
  }
  return out;
}

std::shared_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& config) {
  config.validate();
  if (config.kind == EmbeddingProviderConfig::Kind::Http) {
    return std::make_shared<HttpEmbedder>(config);
  }
  return std::make_shared<StubEmbedder>(config.seed, config.dim);
}

}  // namespace catrag
