#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catrag/catrag.hpp"
#include "catrag/embed.hpp"
#include "catrag/router.hpp"

namespace catrag {

enum class GoldLabel { Truth, Other };

struct QAItem {
  std::string question;
  std::string reference_answer;
  GoldLabel gold = GoldLabel::Truth;
};

/// qa.jsonl: {"question", "reference_answer", "label": "Truth"|"Other"}.
std::vector<QAItem> load_qa_items(const std::filesystem::path& path);

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct EvalMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate_precision = false;  // no predicted positives
  bool degenerate_recall = false;     // no actual positives
};

/// Harmonic mean; 0 when both inputs are 0.
double f1_score(double precision, double recall) noexcept;

/// Throws EmptyEval when all counts are zero.
EvalMetrics metrics_from_counts(const ConfusionCounts& counts);

/// Scores a generated answer against a reference; higher is more similar.
class AnswerJudge {
 public:
  virtual ~AnswerJudge() = default;
  virtual double similarity(std::string_view generated, std::string_view reference) const = 0;
};

/// Cosine between embeddings of the two answers. Empty input scores -1 so it
/// never passes a threshold in [0, 1].
class EmbeddingJudge final : public AnswerJudge {
 public:
  explicit EmbeddingJudge(std::shared_ptr<const EmbeddingProvider> embedder) : embedder_(std::move(embedder)) {}
  double similarity(std::string_view generated, std::string_view reference) const override;

 private:
  std::shared_ptr<const EmbeddingProvider> embedder_;
};

/// True iff similarity(generated, reference) >= threshold.
bool judge(std::string_view generated, std::string_view reference, double threshold, const AnswerJudge& judge);

using QueryFn = std::function<QueryResult(std::string_view, const QueryConfig&)>;

struct QAEvalOptions {
  std::vector<double> thresholds{0.6, 0.7, 0.8};
  QueryConfig query;                    // mode selects hybrid vs vector-only
  bool couple_graph_threshold = false;  // also use each threshold as sim_threshold
  int repeat = 1;                       // latency averaged over this many runs
  std::size_t parallelism = 1;          // > 1 disables latency reporting
};

struct ItemOutcome {
  std::string question;
  GoldLabel gold = GoldLabel::Truth;
  std::string answer;
  double similarity = 0.0;
  bool failed = false;
  std::string error;
  double latency_ms = 0.0;
  std::size_t graph_hits = 0;
  std::size_t entities = 0;
  std::size_t relations = 0;
};

struct EvalRow {
  double threshold = 0.0;
  RetrievalMode mode = RetrievalMode::CatRag;
  ConfusionCounts counts;
  EvalMetrics metrics;
  std::size_t failures = 0;
  double wall_seconds = 0.0;
  std::optional<double> mean_latency_ms;  // unset when parallelism > 1
  // Evidence totals across items, so RAG rows visibly carry no graph evidence.
  std::size_t graph_hits = 0;
  std::size_t entities = 0;
  std::size_t relations = 0;
};

struct EvalTable {
  std::vector<EvalRow> rows;
  std::vector<std::vector<ItemOutcome>> outcomes;  // parallel to rows

  /// Index of the best-F1 row; ties go to the lowest threshold.
  std::optional<std::size_t> best_row() const;
  std::size_t failures() const noexcept;
};

/// For each threshold: query every item, judge against its reference, and
/// tally Truth→tp/fn, Other→fp/tn. Failed queries are excluded and counted.
EvalTable run_qa_eval(std::span<const QAItem> items, const QueryFn& system, const AnswerJudge& judge,
                      const QAEvalOptions& options);

/// Arithmetic grid lo, lo+step, … <= hi (at least one row).
std::vector<double> threshold_grid(double lo, double hi, double step);

EvalTable sweep_thresholds(double lo, double hi, double step, std::span<const QAItem> items,
                           const QueryFn& system, const AnswerJudge& judge, QAEvalOptions options);

std::string render_table(const EvalTable& table);
std::string render_csv(const EvalTable& table);
/// Side-by-side "CR | R" table for the same thresholds.
std::string render_paired(const EvalTable& catrag, const EvalTable& rag);
std::string render_paired_csv(const EvalTable& catrag, const EvalTable& rag);

struct ClassReport {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct RouterEvaluation {
  EvalMetrics macro;  // accuracy plus macro-averaged P/R/F1
  std::vector<ClassReport> per_class;
  std::size_t test_size = 0;
  double train_seconds = 0.0;
  double test_seconds = 0.0;
};

/// Classes are the union of gold and predicted labels, sorted by name.
RouterEvaluation evaluate_router(const LabelPredictor& model, std::span<const TrainingExample> testset,
                                 double train_seconds = 0.0);

std::string render_router_header();
std::string render_router_row(std::size_t index, std::string_view model, std::string_view params,
                              const RouterEvaluation& eval);
std::string render_router_classes(const RouterEvaluation& eval);

}  // namespace catrag
