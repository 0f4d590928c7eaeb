#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace catrag {

struct CategoryLabel {
  std::string name;
  std::size_t id = 0;

  friend bool operator==(const CategoryLabel&, const CategoryLabel&) = default;
};

struct TrainingExample {
  std::string text;
  std::string label;
};

struct TrainConfig {
  int epochs = 100;
  int ngram_order = 3;
  std::size_t dim = 64;
  std::uint64_t bucket_count = 1ULL << 20;
  double lr_start = 0.1;  // decays linearly to zero over all updates
  std::uint64_t seed = 0;
  std::size_t min_count = 1;
};

struct Prediction {
  CategoryLabel label;
  double confidence = 0.0;
  std::vector<double> distribution;  // indexed by label id
  bool low_signal = false;           // no known features in the input
};

/// Anything that maps text to a label name; the router evaluation accepts any
/// implementation so other classifiers can be compared against the router.
class LabelPredictor {
 public:
  virtual ~LabelPredictor() = default;
  virtual std::string predict_label(std::string_view text) const = 0;
};

/// Word n-grams of lowercased, punctuation-trimmed tokens, hashed with
/// FNV-1a and folded into `bucket_count`.
std::vector<std::uint64_t> hashed_ngrams(std::string_view text, int ngram_order,
                                         std::uint64_t bucket_count);

/// fastText-style linear classifier: hidden = mean of n-gram embeddings,
/// softmax over label logits, trained by per-example SGD.
class RouterModel final : public LabelPredictor {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  static RouterModel train(std::span<const TrainingExample> examples, const TrainConfig& config);

  Prediction predict(std::string_view text) const;
  std::string predict_label(std::string_view text) const override { return predict(text).label.name; }

  const std::vector<CategoryLabel>& labels() const noexcept { return labels_; }
  std::optional<CategoryLabel> find_label(std::string_view name) const;

  std::size_t dim() const noexcept { return dim_; }
  int ngram_order() const noexcept { return ngram_order_; }
  std::uint64_t bucket_count() const noexcept { return bucket_count_; }
  std::size_t trained_rows() const noexcept { return row_of_bucket_.size(); }

  void save(const std::filesystem::path& path) const;
  static RouterModel load(const std::filesystem::path& path);

  std::string serialize() const;
  static RouterModel deserialize(std::string_view bytes);

 private:
  std::vector<std::uint32_t> feature_rows(std::string_view text) const;
  std::vector<double> logits(std::span<const std::uint32_t> rows) const;

  std::uint64_t bucket_count_ = 0;
  std::size_t dim_ = 0;
  int ngram_order_ = 1;
  std::uint64_t seed_ = 0;
  std::vector<CategoryLabel> labels_;
  // Sparse input matrix: only buckets observed in training own a row.
  std::unordered_map<std::uint64_t, std::uint32_t> row_of_bucket_;
  std::vector<std::uint64_t> bucket_of_row_;
  std::vector<float> input_;   // rows × dim
  std::vector<float> output_;  // labels × dim
};

/// Always predicts the most frequent training label (ties → smallest name).
class MajorityBaseline final : public LabelPredictor {
 public:
  explicit MajorityBaseline(std::span<const TrainingExample> examples);
  std::string predict_label(std::string_view) const override { return label_; }

 private:
  std::string label_;
};

std::vector<TrainingExample> load_training_data(const std::filesystem::path& path);

struct TrainTestSplit {
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> test;
};

/// Seeded shuffle, then the first `train_fraction` go to train. The fraction
/// must lie strictly between 0 and 1 (SplitInvalid otherwise).
TrainTestSplit split_train_test(std::span<const TrainingExample> examples, double train_fraction,
                                std::uint64_t seed);

}  // namespace catrag
