#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "catrag/ner.hpp"

namespace catrag {

struct RelationTriplet {
  std::string subject;
  std::string predicate;
  std::string object;
  std::string chunk_id;

  // Ordered by (chunk_id, subject, predicate, object).
  friend auto operator<=>(const RelationTriplet& a, const RelationTriplet& b) {
    if (auto c = a.chunk_id <=> b.chunk_id; c != 0) return c;
    if (auto c = a.subject <=> b.subject; c != 0) return c;
    if (auto c = a.predicate <=> b.predicate; c != 0) return c;
    return a.object <=> b.object;
  }
  friend bool operator==(const RelationTriplet&, const RelationTriplet&) = default;
};

/// "subject —predicate→ object"
std::string format_relation(const RelationTriplet& r);

inline constexpr std::size_t kMaxPredicateLength = 48;
inline constexpr std::string_view kCoOccurs = "co_occurs_with";
inline constexpr std::string_view kRefusal = "No relevant regulation found.";

/// Lowercase with whitespace runs collapsed to '_'. Empty when the input has
/// no visible characters.
std::string normalize_predicate(std::string_view predicate);

struct RelationExtraction {
  std::vector<RelationTriplet> triplets;
  std::size_t rejected = 0;  // dropped by validation
};

/// Keeps triplets whose endpoints are in `entities` (by canonical form),
/// with distinct endpoints and a valid predicate; dedups and stamps chunk_id.
/// At most `cap` survive.
RelationExtraction validate_relations(const std::vector<RelationTriplet>& raw,
                                      const std::vector<Entity>& entities,
                                      const std::string& chunk_id, std::size_t cap);

struct ContextChunk {
  enum class Origin { Vector, Graph };
  std::string chunk_id;
  double score = 0.0;
  std::string category;
  std::string text;
  Origin origin = Origin::Vector;
};

struct AssembledContext {
  std::vector<ContextChunk> chunks;
  std::vector<std::string> entities;
  std::vector<RelationTriplet> relations;

  bool empty() const noexcept { return chunks.empty(); }

  /// Three labeled sections: CONTEXT CHUNKS, ENTITIES, RELATIONS.
  std::string serialize() const;

  /// Drops whole chunks from the tail until serialize() fits in max_chars.
  void truncate_to(std::size_t max_chars);
};

struct GenProviderConfig {
  enum class Kind { Stub, Http };
  Kind kind = Kind::Stub;
  std::string base_url;
  std::string model_name;
  std::string api_key_env;
  double temperature = 0.0;
  int timeout_ms = 30000;
  int max_retries = 2;
  std::size_t max_context_chars = 24000;
  std::size_t relation_cap = 20;
  double requests_per_second = 2.0;  // relation extraction ceiling; <= 0 disables

  void validate() const;
};

class GenerationProvider {
 public:
  virtual ~GenerationProvider() = default;
  /// Throws RelationParse when the model output cannot be parsed.
  virtual RelationExtraction extract_relations(std::string_view chunk_text,
                                               const std::vector<Entity>& entities,
                                               const std::string& chunk_id) const = 0;
  /// Throws GenerationUnavailable on provider failure.
  virtual std::string generate(std::string_view query, const AssembledContext& context) const = 0;
};

/// Truncates the context to `max_context_chars` and generates. An empty
/// context yields the fixed refusal without calling the provider.
std::string generate_answer(const GenerationProvider& provider, std::string_view query,
                            AssembledContext context, std::size_t max_context_chars);

/// Deterministic offline provider: sentence co-occurrence relations and an
/// extractive answer template.
class StubGenerator final : public GenerationProvider {
 public:
  explicit StubGenerator(std::size_t relation_cap = 20) : relation_cap_(relation_cap) {}
  RelationExtraction extract_relations(std::string_view chunk_text, const std::vector<Entity>& entities,
                                       const std::string& chunk_id) const override;
  std::string generate(std::string_view query, const AssembledContext& context) const override;

 private:
  std::size_t relation_cap_;
};

/// Chat-completion client: POST {base_url}/chat/completions.
class HttpGenerator final : public GenerationProvider {
 public:
  static constexpr std::string_view kAnswerSystemPrompt =
      "You are an academic regulation advisor. Answer only from the provided context. "
      "If the context does not contain the answer, say you do not know.";

  explicit HttpGenerator(GenProviderConfig config);
  RelationExtraction extract_relations(std::string_view chunk_text, const std::vector<Entity>& entities,
                                       const std::string& chunk_id) const override;
  std::string generate(std::string_view query, const AssembledContext& context) const override;

  /// Prompt sent for relation extraction; exposed for tests.
  static std::string relation_prompt(std::string_view chunk_text, const std::vector<Entity>& entities);
  /// Parses the first JSON array of {"subject","predicate","object"} found in
  /// `content`. Throws RelationParse.
  static std::vector<RelationTriplet> parse_relations(std::string_view content);

 private:
  std::string chat(const std::string& system, const std::string& user) const;
  void throttle() const;

  GenProviderConfig config_;
  mutable std::mutex throttle_mutex_;
  mutable std::chrono::steady_clock::time_point next_slot_{};
};

/// Caps concurrent generate() calls on the wrapped provider; callers beyond
/// the cap wait for a slot.
class BoundedGenerator final : public GenerationProvider {
 public:
  BoundedGenerator(std::shared_ptr<const GenerationProvider> inner, std::size_t max_in_flight);
  ~BoundedGenerator() override;
  RelationExtraction extract_relations(std::string_view chunk_text, const std::vector<Entity>& entities,
                                       const std::string& chunk_id) const override;
  std::string generate(std::string_view query, const AssembledContext& context) const override;

 private:
  struct Slots;
  std::shared_ptr<const GenerationProvider> inner_;
  std::unique_ptr<Slots> slots_;
};

std::shared_ptr<GenerationProvider> make_generation_provider(const GenProviderConfig& config);

}  // namespace catrag
