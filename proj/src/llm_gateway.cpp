#include "catrag/llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <semaphore>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "catrag/error.hpp"
#include "catrag/http_util.hpp"
#include "catrag/log.hpp"
#include "catrag/text.hpp"

namespace catrag {

using nlohmann::json;

namespace {

bool word_byte(const std::string& s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  if (c >= 0x80) return true;
  return text::is_word(c);
}

// Whole-word occurrence of `needle` in `haystack` (both canonical).
bool contains_word(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) {
    const auto end = pos + needle.size();
    const bool left = pos == 0 || !word_byte(haystack, pos - 1);
    const bool right = end == haystack.size() || !word_byte(haystack, end);
    if (left && right) return true;
  }
  return false;
}

// Splits on ! ? ; and on '.' followed by whitespace or end of text.
std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    const bool stop = c == '!' || c == '?' || c == ';' ||
                      (c == '.' && (i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1]))));
    if (stop) {
      out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  out.push_back(std::move(current));
  return out;
}

std::string format_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", score);
  return buf;
}

}  // namespace

std::string format_relation(const RelationTriplet& r) {
  return r.subject + " —" + r.predicate + "→ " + r.object;
}

std::string normalize_predicate(std::string_view predicate) {
  return text::join(text::split_whitespace(text::lowercase(predicate)), "_");
}

RelationExtraction validate_relations(const std::vector<RelationTriplet>& raw,
                                      const std::vector<Entity>& entities,
                                      const std::string& chunk_id, std::size_t cap) {
  std::set<std::string> allowed;
  for (const auto& e : entities) allowed.insert(e.canonical);

  RelationExtraction out;
  std::set<RelationTriplet> seen;
  for (const auto& r : raw) {
    RelationTriplet t{text::canonicalize(r.subject), normalize_predicate(r.predicate),
                      text::canonicalize(r.object), chunk_id};
    const bool valid = allowed.contains(t.subject) && allowed.contains(t.object) && t.subject != t.object &&
                       !t.predicate.empty() && t.predicate.size() <= kMaxPredicateLength;
    if (!valid) {
      ++out.rejected;
      continue;
    }
    if (!seen.insert(t).second) continue;
    if (out.triplets.size() >= cap) continue;
    out.triplets.push_back(std::move(t));
  }
  return out;
}

std::string AssembledContext::serialize() const {
  std::string out = "CONTEXT CHUNKS\n";
  for (const auto& c : chunks) {
    out += "[" + c.chunk_id + " | " + format_score(c.score) + " | " + c.category + "] " + c.text + "\n";
  }
  out += "\nENTITIES\n" + text::join(entities, ", ") + "\n";
  out += "\nRELATIONS\n";
  for (const auto& r : relations) out += format_relation(r) + "\n";
  return out;
}

void AssembledContext::truncate_to(std::size_t max_chars) {
  while (!chunks.empty() && serialize().size() > max_chars) chunks.pop_back();
}

void GenProviderConfig::validate() const {
  if (temperature < 0.0) throw Error(ErrorCode::ConfigError, "generation temperature must be >= 0");
  if (kind == Kind::Http && base_url.empty()) {
    throw Error(ErrorCode::ConfigError, "http generation provider requires base_url");
  }
  if (timeout_ms <= 0 || max_retries < 0) {
    throw Error(ErrorCode::ConfigError, "generation timeout must be positive and retries non-negative");
  }
}

std::string generate_answer(const GenerationProvider& provider, std::string_view query,
                            AssembledContext context, std::size_t max_context_chars) {
  context.truncate_to(max_context_chars);
  if (context.empty()) return std::string(kRefusal);
  return provider.generate(query, context);
}

RelationExtraction StubGenerator::extract_relations(std::string_view chunk_text,
                                                    const std::vector<Entity>& entities,
                                                    const std::string& chunk_id) const {
  if (entities.empty()) return {};
  std::vector<RelationTriplet> raw;
  for (const auto& sentence : split_sentences(chunk_text)) {
    const auto canon = text::canonicalize(sentence);
    std::vector<const Entity*> present;
    for (const auto& e : entities) {
      if (contains_word(canon, e.canonical)) present.push_back(&e);
    }
    for (std::size_t i = 0; i < present.size(); ++i) {
      for (std::size_t j = i + 1; j < present.size(); ++j) {
        const auto& a = present[i]->canonical;
        const auto& b = present[j]->canonical;
        if (a == b) continue;
        raw.push_back({std::min(a, b), std::string(kCoOccurs), std::max(a, b), chunk_id});
      }
    }
  }
  return validate_relations(raw, entities, chunk_id, relation_cap_);
}

std::string StubGenerator::generate(std::string_view, const AssembledContext& context) const {
  if (context.empty()) return std::string(kRefusal);
  std::string out = "Based on " + std::to_string(context.chunks.size()) + " retrieved passages:\n";
  out += context.chunks.front().text;
  if (!context.relations.empty()) {
    out += "\nRelated facts:";
    for (std::size_t i = 0; i < context.relations.size() && i < 5; ++i) {
      out += "\n" + format_relation(context.relations[i]);
    }
  }
  return out;
}

HttpGenerator::HttpGenerator(GenProviderConfig config) : config_(std::move(config)) { config_.validate(); }

void HttpGenerator::throttle() const {
  if (config_.requests_per_second <= 0.0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / config_.requests_per_second));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(throttle_mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

std::string HttpGenerator::chat(const std::string& system, const std::string& user) const {
  json body{{"model", config_.model_name},
            {"temperature", config_.temperature},
            {"messages", json::array({json{{"role", "system"}, {"content", system}},
                                      json{{"role", "user"}, {"content", user}}})}};
  http::PostOptions options{config_.timeout_ms, config_.max_retries, {}};
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
      options.headers["Authorization"] = std::string("Bearer ") + key;
    }
  }
  const auto res = http::post_json(config_.base_url, "/chat/completions", body.dump(), options);
  if (res.status != 200) {
    throw Error(ErrorCode::ProviderContract, "chat completion returned HTTP " + std::to_string(res.status));
  }
  try {
    return json::parse(res.body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProviderContract, std::string("malformed chat completion: ") + e.what());
  }
}

std::string HttpGenerator::relation_prompt(std::string_view chunk_text, const std::vector<Entity>& entities) {
  json names = json::array();
  for (const auto& e : entities) names.push_back(e.canonical);
  return "Extract relations between the listed entities from the passage.\n"
         "Use only these entity strings, exactly as written: " +
         names.dump() +
         "\nReply with a JSON array only, each element "
         "{\"subject\": entity, \"predicate\": short verb phrase, \"object\": entity}.\n"
         "Return [] if no relation is stated.\n\nPassage:\n" +
         std::string(chunk_text);
}

std::vector<RelationTriplet> HttpGenerator::parse_relations(std::string_view content) {
  const auto begin = content.find('[');
  const auto end = content.rfind(']');
  if (begin == std::string_view::npos || end == std::string_view::npos || end < begin) {
    throw Error(ErrorCode::RelationParse, "no JSON array in model output");
  }
  std::vector<RelationTriplet> out;
  try {
    const auto arr = json::parse(content.substr(begin, end - begin + 1));
    for (const auto& item : arr) {
      out.push_back({item.at("subject").get<std::string>(), item.at("predicate").get<std::string>(),
                     item.at("object").get<std::string>(), {}});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::RelationParse, std::string("unparsable relation array: ") + e.what());
  }
  return out;
}

RelationExtraction HttpGenerator::extract_relations(std::string_view chunk_text,
                                                    const std::vector<Entity>& entities,
                                                    const std::string& chunk_id) const {
  if (entities.empty()) return {};
  const auto prompt = relation_prompt(chunk_text, entities);
  std::string last;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    throttle();
    const auto content = chat("You extract knowledge-graph relations and answer in JSON.", prompt);
    try {
      return validate_relations(parse_relations(content), entities, chunk_id, config_.relation_cap);
    } catch (const Error& e) {
      last = e.what();
      log::debug("relation parse attempt " + std::to_string(attempt + 1) + " failed: " + last);
    }
  }
  throw Error(ErrorCode::RelationParse, "chunk " + chunk_id + ": " + last);
}

std::string HttpGenerator::generate(std::string_view query, const AssembledContext& context) const {
  try {
    return chat(std::string(kAnswerSystemPrompt),
                "Question: " + std::string(query) + "\n\n" + context.serialize());
  } catch (const Error& e) {
    throw Error(ErrorCode::GenerationUnavailable, e.what());
  }
}

struct BoundedGenerator::Slots {
  explicit Slots(std::size_t n) : sem(static_cast<std::ptrdiff_t>(n)) {}
  std::counting_semaphore<> sem;
};

BoundedGenerator::BoundedGenerator(std::shared_ptr<const GenerationProvider> inner, std::size_t max_in_flight)
    : inner_(std::move(inner)), slots_(std::make_unique<Slots>(std::max<std::size_t>(1, max_in_flight))) {}

BoundedGenerator::~BoundedGenerator() = default;

RelationExtraction BoundedGenerator::extract_relations(std::string_view chunk_text,
                                                       const std::vector<Entity>& entities,
                                                       const std::string& chunk_id) const {
  return inner_->extract_relations(chunk_text, entities, chunk_id);
}

std::string BoundedGenerator::generate(std::string_view query, const AssembledContext& context) const {
  slots_->sem.acquire();
  struct Release {
    std::counting_semaphore<>& sem;
    ~Release() { sem.release(); }
  } release{slots_->sem};
  return inner_->generate(query, context);
}

std::shared_ptr<GenerationProvider> make_generation_provider(const GenProviderConfig& config) {
  config.validate();
  if (config.kind == GenProviderConfig::Kind::Http) return std::make_shared<HttpGenerator>(config);
  return std::make_shared<StubGenerator>(config.relation_cap);
}

}  // namespace catrag
