#include "catrag/ner.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "catrag/error.hpp"
#include "catrag/http_util.hpp"
#include "catrag/io_util.hpp"
#include "catrag/text.hpp"

namespace catrag {

using nlohmann::json;

namespace {

bool is_word_token(const Token& t) {
  for (const auto& cp : text::decode(t.text)) {
    if (text::is_word(cp.value)) return true;
  }
  return false;
}

bool is_sentence_end(const Token& t) {
  return t.text == "." || t.text == "!" || t.text == "?" || t.text == ";";
}

bool starts_upper(const Token& t) {
  const auto cps = text::decode(t.text);
  return !cps.empty() && text::is_upper(cps.front().value);
}

struct Span {
  std::size_t first;
  std::size_t last;  // inclusive
};

}  // namespace

std::vector<Token> tokenize(std::string_view input) {
  std::vector<Token> tokens;
  const auto cps = text::decode(input);
  std::size_t i = 0;
  while (i < cps.size()) {
    if (text::is_space(cps[i].value)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < cps.size() && !text::is_space(cps[j].value)) ++j;
    // Word occupies [i, j). Peel punctuation off both ends.
    std::size_t b = i, e = j;
    while (b < e && text::is_punct(cps[b].value)) ++b;
    while (e > b && text::is_punct(cps[e - 1].value)) --e;
    auto emit = [&](std::size_t from, std::size_t to) {
      const auto start = cps[from].byte_offset;
      const auto end = cps[to - 1].byte_offset + cps[to - 1].byte_length;
      tokens.push_back({std::string(input.substr(start, end - start)), start, end, std::nullopt});
    };
    for (std::size_t k = i; k < b; ++k) emit(k, k + 1);
    if (b < e) emit(b, e);
    for (std::size_t k = std::max(e, b); k < j; ++k) emit(k, k + 1);
    i = j;
  }
  return tokens;
}

std::vector<std::string> load_gazetteer(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    auto phrase = text::canonicalize(line);
    if (phrase.empty() || phrase.front() == '#') continue;
    if (seen.insert(phrase).second) out.push_back(std::move(phrase));
  }
  return out;
}

std::vector<Entity> extract_entities(std::string_view source_text, const std::vector<Token>& tokens,
                                     const std::vector<std::string>& gazetteer,
                                     const std::string& chunk_id) {
  if (tokens.empty()) return {};

  std::vector<std::string> lowered;
  lowered.reserve(tokens.size());
  for (const auto& t : tokens) lowered.push_back(text::lowercase(t.text));

  std::vector<std::vector<std::string>> phrases;
  for (const auto& g : gazetteer) {
    std::vector<std::string> toks;
    for (const auto& t : tokenize(g)) toks.push_back(text::lowercase(t.text));
    if (!toks.empty()) phrases.push_back(std::move(toks));
  }
  std::stable_sort(phrases.begin(), phrases.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });

  std::vector<Span> spans;
  std::vector<bool> covered(tokens.size(), false);
  for (std::size_t i = 0; i < tokens.size();) {
    bool matched = false;
    if (is_word_token(tokens[i])) {
      for (const auto& phrase : phrases) {
        if (i + phrase.size() > tokens.size()) continue;
        if (!std::equal(phrase.begin(), phrase.end(), lowered.begin() + static_cast<std::ptrdiff_t>(i))) continue;
        spans.push_back({i, i + phrase.size() - 1});
        std::fill(covered.begin() + static_cast<std::ptrdiff_t>(i),
                  covered.begin() + static_cast<std::ptrdiff_t>(i + phrase.size()), true);
        i += phrase.size();
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }

  const bool tagged = std::all_of(tokens.begin(), tokens.end(), [](const Token& t) { return t.pos_tag.has_value(); });
  std::vector<bool> sentence_initial(tokens.size(), false);
  bool at_start = true;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_word_token(tokens[i])) {
      sentence_initial[i] = at_start;
      at_start = false;
    } else if (is_sentence_end(tokens[i])) {
      at_start = true;
    }
  }

  for (std::size_t i = 0; i < tokens.size();) {
    if (covered[i] || !is_word_token(tokens[i]) || !starts_upper(tokens[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < tokens.size() && !covered[j + 1] && is_word_token(tokens[j + 1]) && starts_upper(tokens[j + 1])) ++j;
    bool mid_sentence = false;
    bool has_noun = !tagged;
    for (std::size_t k = i; k <= j; ++k) {
      mid_sentence = mid_sentence || !sentence_initial[k];
      if (tagged && !tokens[k].pos_tag->empty() && tokens[k].pos_tag->front() == 'N') has_noun = true;
    }
    if (mid_sentence && has_noun) spans.push_back({i, j});
    i = j + 1;
  }

  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.first < b.first; });
  std::vector<Entity> out;
  std::set<std::string> seen;
  for (const auto& s : spans) {
    const auto start = tokens[s.first].start;
    const auto end = tokens[s.last].end;
    Entity e{std::string(source_text.substr(start, end - start)), {}, chunk_id};
    e.canonical = text::canonicalize(e.surface);
    if (e.canonical.empty() || !seen.insert(e.canonical).second) continue;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Entity> HeuristicExtractor::extract(std::string_view text, const std::string& chunk_id) const {
  return extract_entities(text, tokenize(text), gazetteer_, chunk_id);
}

std::vector<Entity> http_extract(const NerProviderConfig& config, std::string_view input,
                                 const std::string& chunk_id) {
  const auto res = http::post_json(config.base_url, "", json{{"text", input}}.dump(),
                                   {config.timeout_ms, config.max_retries, {}});
  if (res.status != 200) {
    throw Error(ErrorCode::ProviderContract, "NER provider returned HTTP " + std::to_string(res.status));
  }
  std::vector<Entity> out;
  std::set<std::string> seen;
  try {
    const auto doc = json::parse(res.body);
    for (const auto& span : doc.at("entities")) {
      const auto start = span.at("start").get<std::int64_t>();
      const auto end = span.at("end").get<std::int64_t>();
      if (start < 0 || end <= start || static_cast<std::size_t>(end) > input.size()) {
        throw Error(ErrorCode::ProviderContract, "NER span [" + std::to_string(start) + ", " +
                                                     std::to_string(end) + ") out of range");
      }
      Entity e;
      e.surface = span.contains("surface") ? span["surface"].get<std::string>()
                                           : std::string(input.substr(static_cast<std::size_t>(start),
                                                                      static_cast<std::size_t>(end - start)));
      e.canonical = text::canonicalize(e.surface);
      e.source_chunk = chunk_id;
      if (e.canonical.empty() || !seen.insert(e.canonical).second) continue;
      out.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ProviderContract, std::string("malformed NER response: ") + ex.what());
  }
  return out;
}

HttpExtractor::HttpExtractor(NerProviderConfig config, std::vector<std::string> gazetteer)
    : config_(std::move(config)), fallback_(std::move(gazetteer)) {}

std::vector<Entity> HttpExtractor::extract(std::string_view text, const std::string& chunk_id) const {
  try {
    return http_extract(config_, text, chunk_id);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ProviderUnavailable) throw;
    ++fallbacks_;
    return fallback_.extract(text, chunk_id);
  }
}

std::size_t HttpExtractor::fallbacks() const noexcept { return fallbacks_.load(); }

}  // namespace catrag
