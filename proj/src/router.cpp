#include "catrag/router.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "catrag/error.hpp"
#include "catrag/hash.hpp"
#include "catrag/io_util.hpp"
#include "catrag/text.hpp"

namespace catrag {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'T', 'R', 'A', 'G', 'R', 'M'};

std::vector<std::string> router_tokens(std::string_view input) {
  std::vector<std::string> tokens;
  for (const auto& word : text::split_whitespace(text::lowercase(input))) {
    const auto cps = text::decode(word);
    std::size_t b = 0, e = cps.size();
    while (b < e && text::is_punct(cps[b].value)) ++b;
    while (e > b && text::is_punct(cps[e - 1].value)) --e;
    if (b == e) continue;
    const auto from = cps[b].byte_offset;
    const auto to = cps[e - 1].byte_offset + cps[e - 1].byte_length;
    tokens.push_back(word.substr(from, to - from));
  }
  return tokens;
}

void softmax_inplace(std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (auto& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (auto& x : v) x /= sum;
}

// Little-endian binary writer/reader for the model file.
class Writer {
 public:
  void bytes(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  template <typename T>
  void pod(T value) {
    unsigned char buf[sizeof(T)];
    std::uint64_t bits = 0;
    std::memcpy(&bits, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
    bytes(buf, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  void bytes(void* data, std::size_t n) {
    if (in_.size() - pos_ < n) throw Error(ErrorCode::ModelVersionError, "router model file is truncated");
    std::memcpy(data, in_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod() {
    unsigned char buf[sizeof(T)];
    bytes(buf, sizeof(T));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool done() const noexcept { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint64_t> hashed_ngrams(std::string_view text, int ngram_order,
                                         std::uint64_t bucket_count) {
  const auto tokens = router_tokens(text);
  std::vector<std::uint64_t> out;
  for (int n = 1; n <= ngram_order; ++n) {
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
      std::uint64_t h = fnv1a64(tokens[i]);
      for (int k = 1; k < n; ++k) {
        h = fnv1a64(" ", h);
        h = fnv1a64(tokens[i + static_cast<std::size_t>(k)], h);
      }
      out.push_back(h % bucket_count);
    }
  }
  return out;
}

RouterModel RouterModel::train(std::span<const TrainingExample> examples, const TrainConfig& config) {
  if (examples.empty()) throw Error(ErrorCode::EmptyTraining, "no training examples");
  if (config.epochs < 1 || config.lr_start <= 0.0 || config.ngram_order < 1 || config.dim == 0 ||
      config.bucket_count == 0) {
    throw Error(ErrorCode::ConfigError, "invalid router training configuration");
  }
  std::set<std::string> names;
  for (const auto& ex : examples) {
    if (ex.text.empty()) throw Error(ErrorCode::EmptyTraining, "training example with empty text");
    if (ex.label.empty()) throw Error(ErrorCode::EmptyTraining, "training example with empty label");
    names.insert(ex.label);
  }
  if (names.size() < 2) {
    throw Error(ErrorCode::DegenerateLabels, "training data has " + std::to_string(names.size()) +
                                                 " distinct label(s); need at least 2");
  }

  RouterModel m;
  m.bucket_count_ = config.bucket_count;
  m.dim_ = config.dim;
  m.ngram_order_ = config.ngram_order;
  m.seed_ = config.seed;
  std::map<std::string, std::size_t> label_id;
  for (const auto& name : names) {
    label_id[name] = m.labels_.size();
    m.labels_.push_back({name, m.labels_.size()});
  }

  // Bucket frequencies decide which rows exist (min_count).
  std::vector<std::vector<std::uint64_t>> buckets;
  buckets.reserve(examples.size());
  std::unordered_map<std::uint64_t, std::size_t> freq;
  std::vector<std::uint64_t> first_seen;
  for (const auto& ex : examples) {
    buckets.push_back(hashed_ngrams(ex.text, config.ngram_order, config.bucket_count));
    for (auto b : buckets.back()) {
      if (freq[b]++ == 0) first_seen.push_back(b);
    }
  }
  for (auto b : first_seen) {
    if (freq[b] < config.min_count) continue;
    m.row_of_bucket_.emplace(b, static_cast<std::uint32_t>(m.bucket_of_row_.size()));
    m.bucket_of_row_.push_back(b);
  }

  const std::size_t dim = m.dim_;
  const std::size_t k = m.labels_.size();
  SplitMix64 rng(config.seed);
  m.input_.resize(m.bucket_of_row_.size() * dim);
  const double bound = 1.0 / static_cast<double>(dim);
  for (auto& w : m.input_) w = static_cast<float>((2.0 * rng.next_unit() - 1.0) * bound);
  m.output_.assign(k * dim, 0.0F);

  std::vector<std::vector<std::uint32_t>> rows(examples.size());
  std::vector<std::size_t> targets(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    for (auto b : buckets[i]) {
      if (auto it = m.row_of_bucket_.find(b); it != m.row_of_bucket_.end()) rows[i].push_back(it->second);
    }
    targets[i] = label_id.at(examples[i].label);
  }

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<float> hidden(dim), grad(dim);
  std::vector<double> probs(k);
  const double total_steps = static_cast<double>(config.epochs) * static_cast<double>(examples.size());
  std::size_t step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);

    for (auto idx : order) {
      const auto lr = static_cast<float>(config.lr_start * (1.0 - static_cast<double>(step) / total_steps));
      ++step;
      const auto& feats = rows[idx];
      if (feats.empty()) continue;

      std::fill(hidden.begin(), hidden.end(), 0.0F);
      for (auto r : feats) {
        const float* row = &m.input_[r * dim];
        for (std::size_t d = 0; d < dim; ++d) hidden[d] += row[d];
      }
      const float inv_n = 1.0F / static_cast<float>(feats.size());
      for (auto& h : hidden) h *= inv_n;

      for (std::size_t c = 0; c < k; ++c) {
        const float* out = &m.output_[c * dim];
        double z = 0.0;
        for (std::size_t d = 0; d < dim; ++d) z += static_cast<double>(out[d]) * hidden[d];
        probs[c] = z;
      }
      softmax_inplace(probs);

      std::fill(grad.begin(), grad.end(), 0.0F);
      for (std::size_t c = 0; c < k; ++c) {
        const float alpha = lr * (static_cast<float>(c == targets[idx]) - static_cast<float>(probs[c]));
        float* out = &m.output_[c * dim];
        for (std::size_t d = 0; d < dim; ++d) {
          grad[d] += alpha * out[d];
          out[d] += alpha * hidden[d];
        }
      }
      for (auto& g : grad) g *= inv_n;
      for (auto r : feats) {
        float* row = &m.input_[r * dim];
        for (std::size_t d = 0; d < dim; ++d) row[d] += grad[d];
      }
    }
  }
  return m;
}

std::vector<std::uint32_t> RouterModel::feature_rows(std::string_view text) const {
  std::vector<std::uint32_t> rows;
  for (auto b : hashed_ngrams(text, ngram_order_, bucket_count_)) {
    if (auto it = row_of_bucket_.find(b); it != row_of_bucket_.end()) rows.push_back(it->second);
  }
  return rows;
}

std::vector<double> RouterModel::logits(std::span<const std::uint32_t> rows) const {
  std::vector<float> hidden(dim_, 0.0F);
  for (auto r : rows) {
    const float* row = &input_[r * dim_];
    for (std::size_t d = 0; d < dim_; ++d) hidden[d] += row[d];
  }
  const float inv_n = 1.0F / static_cast<float>(rows.size());
  for (auto& h : hidden) h *= inv_n;
  std::vector<double> z(labels_.size());
  for (std::size_t c = 0; c < labels_.size(); ++c) {
    const float* out = &output_[c * dim_];
    double acc = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) acc += static_cast<double>(out[d]) * hidden[d];
    z[c] = acc;
  }
  return z;
}

Prediction RouterModel::predict(std::string_view text) const {
  Prediction p;
  const auto rows = feature_rows(text);
  if (rows.empty()) {
    p.distribution.assign(labels_.size(), 1.0 / static_cast<double>(labels_.size()));
    p.low_signal = true;
  } else {
    p.distribution = logits(rows);
    softmax_inplace(p.distribution);
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.distribution.size(); ++c) {
    if (p.distribution[c] > p.distribution[best]) best = c;
  }
  p.label = labels_[best];
  p.confidence = p.distribution[best];
  return p;
}

std::optional<CategoryLabel> RouterModel::find_label(std::string_view name) const {
  for (const auto& l : labels_) {
    if (l.name == name) return l;
  }
  return std::nullopt;
}

std::string RouterModel::serialize() const {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kFormatVersion);
  w.pod<std::uint64_t>(bucket_count_);
  w.pod<std::uint64_t>(dim_);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ngram_order_));
  w.pod<std::uint64_t>(seed_);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(labels_.size()));
  for (const auto& l : labels_) w.str(l.name);
  w.pod<std::uint64_t>(bucket_of_row_.size());
  for (auto b : bucket_of_row_) w.pod<std::uint64_t>(b);
  for (float v : input_) w.pod<float>(v);
  for (float v : output_) w.pod<float>(v);
  return w.take();
}

RouterModel RouterModel::deserialize(std::string_view bytes) {
  Reader r(bytes);
  char magic[sizeof(kMagic)];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::ModelVersionError, "not a router model file");
  }
  const auto version = r.pod<std::uint32_t>();
  if (version != kFormatVersion) {
    throw Error(ErrorCode::ModelVersionError, "router model version " + std::to_string(version) +
                                                  ", expected " + std::to_string(kFormatVersion));
  }
  RouterModel m;
  m.bucket_count_ = r.pod<std::uint64_t>();
  m.dim_ = static_cast<std::size_t>(r.pod<std::uint64_t>());
  m.ngram_order_ = static_cast<int>(r.pod<std::uint32_t>());
  m.seed_ = r.pod<std::uint64_t>();
  const auto k = r.pod<std::uint32_t>();
  if (m.bucket_count_ == 0 || m.dim_ == 0 || m.ngram_order_ < 1 || k < 2 || m.dim_ > (1U << 20)) {
    throw Error(ErrorCode::ModelVersionError, "router model header is corrupt");
  }
  for (std::uint32_t i = 0; i < k; ++i) m.labels_.push_back({r.str(), i});
  const auto nrows = r.pod<std::uint64_t>();
  if (nrows > bytes.size()) throw Error(ErrorCode::ModelVersionError, "router model file is truncated");
  m.bucket_of_row_.reserve(nrows);
  for (std::uint64_t i = 0; i < nrows; ++i) {
    const auto b = r.pod<std::uint64_t>();
    m.row_of_bucket_.emplace(b, static_cast<std::uint32_t>(i));
    m.bucket_of_row_.push_back(b);
  }
  if (nrows * m.dim_ * sizeof(float) > bytes.size()) {
    throw Error(ErrorCode::ModelVersionError, "router model file is truncated");
  }
  m.input_.resize(nrows * m.dim_);
  for (auto& v : m.input_) v = r.pod<float>();
  m.output_.resize(k * m.dim_);
  for (auto& v : m.output_) v = r.pod<float>();
  if (!r.done()) throw Error(ErrorCode::ModelVersionError, "trailing bytes after router model");
  for (float v : m.input_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::ModelVersionError, "non-finite router weight");
  }
  return m;
}

void RouterModel::save(const std::filesystem::path& path) const { io::write_file_atomic(path, serialize()); }

RouterModel RouterModel::load(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

MajorityBaseline::MajorityBaseline(std::span<const TrainingExample> examples) {
  if (examples.empty()) throw Error(ErrorCode::EmptyTraining, "no training examples");
  std::map<std::string, std::size_t> counts;
  for (const auto& ex : examples) ++counts[ex.label];
  std::size_t best = 0;
  for (const auto& [name, n] : counts) {
    if (n > best) {
      best = n;
      label_ = name;
    }
  }
}

std::vector<TrainingExample> load_training_data(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::vector<TrainingExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      out.push_back({rec.at("text").get<std::string>(), rec.at("label").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw Error(ErrorCode::EmptyTraining, "no examples in " + path.string());
  return out;
}

TrainTestSplit split_train_test(std::span<const TrainingExample> examples, double train_fraction,
                                std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::SplitInvalid, "train fraction must be strictly between 0 and 1");
  }
  std::vector<TrainingExample> shuffled(examples.begin(), examples.end());
  SplitMix64 rng(seed);
  for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.next_below(i)]);
  const auto cut = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(shuffled.size())));
  if (cut == 0 || cut == shuffled.size()) {
    throw Error(ErrorCode::SplitInvalid, "split leaves an empty train or test set");
  }
  TrainTestSplit split;
  split.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(cut));
  split.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(cut), shuffled.end());
  return split;
}

}  // namespace catrag
