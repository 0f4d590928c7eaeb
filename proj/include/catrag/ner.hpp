#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace catrag {

/// Offsets are UTF-8 byte offsets into the tokenized string.
struct Token {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<std::string> pos_tag;
};

struct Entity {
  std::string surface;
  std::string canonical;  // dedup key
  std::string source_chunk;

  friend bool operator==(const Entity&, const Entity&) = default;
};

/// Whitespace split; leading/trailing punctuation characters become their own
/// tokens, inner punctuation ("2.0", "e-mail") stays.
std::vector<Token> tokenize(std::string_view text);

/// Gazetteer phrases, canonicalized; blank lines and '#' comments skipped.
std::vector<std::string> load_gazetteer(const std::filesystem::path& path);

/// Heuristic extractor: longest gazetteer matches first, then runs of
/// capitalized tokens that are not merely sentence-initial. When every token
/// carries a POS tag, capitalized runs must contain a noun tag (N*).
/// `source_text` is the string the tokens index into.
std::vector<Entity> extract_entities(std::string_view source_text, const std::vector<Token>& tokens,
                                     const std::vector<std::string>& gazetteer,
                                     const std::string& chunk_id);

class EntityExtractor {
 public:
  virtual ~EntityExtractor() = default;
  virtual std::vector<Entity> extract(std::string_view text, const std::string& chunk_id) const = 0;
};

class HeuristicExtractor final : public EntityExtractor {
 public:
  explicit HeuristicExtractor(std::vector<std::string> gazetteer) : gazetteer_(std::move(gazetteer)) {}
  std::vector<Entity> extract(std::string_view text, const std::string& chunk_id) const override;

 private:
  std::vector<std::string> gazetteer_;
};

struct NerProviderConfig {
  std::string base_url;
  int timeout_ms = 10000;
  int max_retries = 2;
};

/// POST {base_url} {"text"} -> {"entities": [{"surface","start","end"}]}.
/// Throws ProviderUnavailable / ProviderContract.
std::vector<Entity> http_extract(const NerProviderConfig& config, std::string_view text,
                                 const std::string& chunk_id);

/// HTTP extractor that falls back to the heuristic path when the provider is
/// unavailable, counting fallbacks.
class HttpExtractor final : public EntityExtractor {
 public:
  HttpExtractor(NerProviderConfig config, std::vector<std::string> gazetteer);
  std::vector<Entity> extract(std::string_view text, const std::string& chunk_id) const override;
  std::size_t fallbacks() const noexcept;

 private:
  NerProviderConfig config_;
  HeuristicExtractor fallback_;
  mutable std::atomic<std::size_t> fallbacks_{0};
};

}  // namespace catrag
