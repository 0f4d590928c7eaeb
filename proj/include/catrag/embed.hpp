#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace catrag {

class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {}

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  double norm() const noexcept;
  /// Scaled copy with unit L2 norm. Throws ZeroVector.
  EmbeddingVector normalized() const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<float> values_;
};

/// Cosine similarity, clamped to [-1, 1]. Throws DimMismatch / ZeroVector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct EmbeddingProviderConfig {
  enum class Kind { Stub, Http };
  Kind kind = Kind::Stub;
  std::size_t dim = 768;
  std::uint64_t seed = 0;
  std::string base_url;
  int timeout_ms = 10000;
  std::size_t batch_size = 32;
  std::size_t max_in_flight = 4;
  int max_retries = 2;

  void validate() const;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const noexcept = 0;
  /// Raw provider call; prefer embed_texts, which enforces the contract.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;
};

/// One L2-normalized vector per input text, in order.
std::vector<EmbeddingVector> embed_texts(const EmbeddingProvider& provider,
                                         std::span<const std::string> texts);
EmbeddingVector embed_text(const EmbeddingProvider& provider, const std::string& text);

/// Offline stand-in for a sentence encoder: lowercased character 1..3-grams
/// each hash (with the seed) to a pseudorandom unit direction; the result is
/// the normalized count-weighted sum. Depends only on (text, seed, dim).
EmbeddingVector stub_embed(std::string_view text, std::uint64_t seed, std::size_t dim);

class StubEmbedder final : public EmbeddingProvider {
 public:
  StubEmbedder(std::uint64_t seed, std::size_t dim);
  std::size_t dim() const noexcept override { return dim_; }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

/// POST {base_url}/embed {"texts": [...]} -> {"vectors": [[...]], "dim": n}
class HttpEmbedder final : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(EmbeddingProviderConfig config);
  ~HttpEmbedder() override;
  std::size_t dim() const noexcept override { return config_.dim; }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override;

 private:
  struct Gate;
  EmbeddingProviderConfig config_;
  std::unique_ptr<Gate> gate_;
};

std::shared_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& config);

}  // namespace catrag
