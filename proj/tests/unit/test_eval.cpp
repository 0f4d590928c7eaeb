#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "catrag/error.hpp"
#include "catrag/eval.hpp"
#include "catrag/hash.hpp"
#include "support.hpp"

using namespace catrag;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::IoError;
}

// Similarity is read from the answer text: "sim=<x>".
class TableJudge final : public AnswerJudge {
 public:
  double similarity(std::string_view generated, std::string_view) const override {
    return std::stod(std::string(generated.substr(4)));
  }
};

QueryFn scripted(std::map<std::string, double> sims) {
  return [sims](std::string_view q, const QueryConfig& qc) {
    if (q == "boom") throw Error(ErrorCode::GenerationUnavailable, "boom");
    QueryResult r;
    r.query = std::string(q);
    r.mode = qc.mode;
    r.answer = "sim=" + std::to_string(sims.at(std::string(q)));
    if (qc.mode == RetrievalMode::CatRag) {
      r.graph_hits.push_back({"g", 0.9, ""});
      r.entities = {"e"};
    }
    return r;
  };
}

}  // namespace

TEST_CASE("metrics from counts") {
  auto m = metrics_from_counts({9, 1, 1, 9});
  CHECK(m.accuracy == doctest::Approx(0.9));
  CHECK(m.precision == doctest::Approx(0.9));
  CHECK(m.recall == doctest::Approx(0.9));
  CHECK(m.f1 == doctest::Approx(0.9));
  auto d = metrics_from_counts({0, 0, 5, 5});
  CHECK(d.precision == 0.0);
  CHECK(d.degenerate_precision);
  CHECK(d.recall == 0.0);
  CHECK(d.f1 == 0.0);
  CHECK(code_of([] { metrics_from_counts({0, 0, 0, 0}); }) == ErrorCode::EmptyEval);
}

TEST_CASE("f1 from the published precision and recall") {
  CHECK(std::abs(f1_score(0.9933, 0.9846) - 0.98894) < 1e-4);
  CHECK(f1_score(0.0, 0.0) == 0.0);
}

TEST_CASE("metric identities hold for random counts") {
  SplitMix64 rng(4);
  for (int i = 0; i < 2000; ++i) {
    ConfusionCounts c{rng.next_below(1000001), rng.next_below(1000001), rng.next_below(1000001), rng.next_below(1000001)};
    if (c.total() == 0) continue;
    auto m = metrics_from_counts(c);
    const double total = static_cast<double>(c.total());
    CHECK(std::abs(m.accuracy - (c.tp + c.tn) / total) < 1e-9);
    if (c.tp + c.fp) CHECK(std::abs(m.precision - double(c.tp) / double(c.tp + c.fp)) < 1e-9);
    if (c.tp + c.fn) CHECK(std::abs(m.recall - double(c.tp) / double(c.tp + c.fn)) < 1e-9);
    const double f = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    CHECK(std::abs(m.f1 - f) < 1e-9);
  }
}

TEST_CASE("embedding judge") {
  EmbeddingJudge j(std::make_shared<StubEmbedder>(0, 128));
  CHECK(judge("same text", "same text", 1.0, j));
  CHECK(judge("abc", "xyz", 0.0, j));
  CHECK(!judge("", "anything", 0.0, j));
  CHECK(!judge("aaaa", "zzzz", 0.7, j));
  SplitMix64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const double t = rng.next_unit();
    if (judge("tuition fee", "tuition fees", t, j)) {
      for (double lower = 0; lower < t; lower += 0.1) CHECK(judge("tuition fee", "tuition fees", lower, j));
    }
  }
}

TEST_CASE("qa eval tallies the confusion matrix per threshold") {
  std::vector<QAItem> items{{"t1", "r", GoldLabel::Truth}, {"t2", "r", GoldLabel::Truth},
                            {"o1", "r", GoldLabel::Other}, {"o2", "r", GoldLabel::Other}};
  const std::map<std::string, double> sims{{"t1", 0.95}, {"t2", 0.75}, {"o1", 0.65}, {"o2", 0.3}};
  QAEvalOptions opt;
  opt.thresholds = {0.6, 0.7, 0.8};
  auto table = run_qa_eval(items, scripted(sims), TableJudge(), opt);
  REQUIRE(table.rows.size() == 3);
  for (const auto& row : table.rows) {
    ConfusionCounts want;
    for (const auto& it : items) {
      const bool yes = sims.at(it.question) >= row.threshold;
      if (it.gold == GoldLabel::Truth) (yes ? want.tp : want.fn)++;
      else (yes ? want.fp : want.tn)++;
    }
    CHECK(row.counts == want);
  }
  CHECK(table.rows[0].counts.tp >= table.rows[1].counts.tp);
  CHECK(table.rows[1].counts.tp >= table.rows[2].counts.tp);
  CHECK(table.rows[0].mean_latency_ms.has_value());
  CHECK(table.rows[0].graph_hits == 4);
  CHECK(table.best_row() == 1u);
}

TEST_CASE("failed queries are excluded and counted") {
  std::vector<QAItem> items{{"t1", "r", GoldLabel::Truth}, {"boom", "r", GoldLabel::Truth}};
  QAEvalOptions opt;
  opt.thresholds = {0.5};
  auto table = run_qa_eval(items, scripted({{"t1", 0.9}}), TableJudge(), opt);
  CHECK(table.rows[0].failures == 1);
  CHECK(table.rows[0].counts.total() == 1);
  CHECK(table.failures() == 1);
  CHECK(table.outcomes[0][1].failed);
}

TEST_CASE("empty item lists are rejected") {
  std::vector<QAItem> none;
  CHECK(code_of([&] { run_qa_eval(none, scripted({}), TableJudge(), {}); }) == ErrorCode::EmptyEval);
}

TEST_CASE("threshold grids") {
  CHECK(threshold_grid(0.1, 1.0, 0.1).size() == 10);
  CHECK(threshold_grid(0.1, 1.0, 0.1).back() == doctest::Approx(1.0));
  CHECK(threshold_grid(0.2, 0.3, 0.5).size() == 1);
  CHECK(code_of([] { threshold_grid(0.5, 0.1, 0.1); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { threshold_grid(0.1, 0.5, 0.0); }) == ErrorCode::ConfigError);
}

TEST_CASE("best row ties go to the lowest threshold") {
  std::vector<QAItem> items{{"t1", "r", GoldLabel::Truth}, {"o1", "r", GoldLabel::Other}};
  auto table = sweep_thresholds(0.1, 1.0, 0.1, items, scripted({{"t1", 0.9}, {"o1", 0.2}}), TableJudge(), {});
  REQUIRE(table.rows.size() == 10);
  REQUIRE(table.best_row());
  CHECK(table.rows[*table.best_row()].threshold == doctest::Approx(0.3));
}

TEST_CASE("parallel evaluation matches serial counts and drops latency") {
  std::vector<QAItem> items;
  std::map<std::string, double> sims;
  SplitMix64 rng(9);
  for (int i = 0; i < 40; ++i) {
    const auto q = "q" + std::to_string(i);
    sims[q] = rng.next_unit();
    items.push_back({q, "r", i % 2 ? GoldLabel::Truth : GoldLabel::Other});
  }
  QAEvalOptions serial, parallel;
  parallel.parallelism = 4;
  auto a = run_qa_eval(items, scripted(sims), TableJudge(), serial);
  auto b = run_qa_eval(items, scripted(sims), TableJudge(), parallel);
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].counts == b.rows[i].counts);
  CHECK(!b.rows[0].mean_latency_ms.has_value());
}

TEST_CASE("coupled thresholds drive the graph threshold") {
  std::vector<QAItem> items{{"t1", "r", GoldLabel::Truth}};
  std::vector<double> seen;
  QueryFn fn = [&](std::string_view, const QueryConfig& qc) {
    seen.push_back(qc.sim_threshold);
    QueryResult r;
    r.answer = "sim=1";
    return r;
  };
  QAEvalOptions opt;
  opt.thresholds = {0.6, 0.8};
  opt.couple_graph_threshold = true;
  run_qa_eval(items, fn, TableJudge(), opt);
  CHECK(seen == std::vector<double>{0.6, 0.8});
  seen.clear();
  opt.couple_graph_threshold = false;
  run_qa_eval(items, fn, TableJudge(), opt);
  CHECK(seen == std::vector<double>{0.7});  // answers reused across judge thresholds
}

TEST_CASE("renderers") {
  std::vector<QAItem> items{{"t1", "r", GoldLabel::Truth}, {"o1", "r", GoldLabel::Other}};
  QAEvalOptions opt;
  opt.query.mode = RetrievalMode::CatRag;
  auto cr = run_qa_eval(items, scripted({{"t1", 0.9}, {"o1", 0.2}}), TableJudge(), opt);
  opt.query.mode = RetrievalMode::Rag;
  auto r = run_qa_eval(items, scripted({{"t1", 0.9}, {"o1", 0.2}}), TableJudge(), opt);
  const auto paired = render_paired(cr, r);
  CHECK(paired.find("CR | R") != std::string::npos);
  CHECK(paired.find("0/0/0") != std::string::npos);
  const auto csv = render_paired_csv(cr, r);
  CHECK(csv.rfind("threshold,accuracy_cr,accuracy_r", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto single = render_csv(cr);
  CHECK(single.find("catrag,0.6000") != std::string::npos);
  CHECK(render_table(cr).find("0.60") != std::string::npos);
}

TEST_CASE("qa item loader") {
  testing::TempDir tmp;
  testing::write_text(tmp / "qa.jsonl",
                      "{\"question\":\"q\",\"reference_answer\":\"a\",\"label\":\"Truth\"}\n"
                      "{\"question\":\"q2\",\"reference_answer\":\"\",\"label\":\"Other\"}\n");
  auto items = load_qa_items(tmp / "qa.jsonl");
  REQUIRE(items.size() == 2);
  CHECK(items[1].gold == GoldLabel::Other);
  testing::write_text(tmp / "bad.jsonl", "{\"question\":\"q\",\"reference_answer\":\"\",\"label\":\"Truth\"}\n");
  CHECK_THROWS_AS(load_qa_items(tmp / "bad.jsonl"), Error);
  testing::write_text(tmp / "empty.jsonl", "\n");
  CHECK(code_of([&] { load_qa_items(tmp / "empty.jsonl"); }) == ErrorCode::EmptyEval);
}

TEST_CASE("toy qa set under stub providers") {
  testing::TempDir tmp;
  auto cfg = testing::build_toy(tmp.path());
  auto engine = open_engine(cfg);
  auto items = load_qa_items(testing::toy_dir() / "qa.jsonl");
  EmbeddingJudge j(engine.providers().embedder);
  QueryFn fn = [&](std::string_view q, const QueryConfig& qc) { return engine.query(q, qc); };
  QAEvalOptions opt;
  opt.thresholds = {0.6, 0.7, 0.8};
  opt.query = cfg.query;
  auto table = run_qa_eval(items, fn, j, opt);
  CHECK(table.rows[0].counts == ConfusionCounts{2, 0, 0, 2});
  CHECK(table.rows[0].metrics.f1 == 1.0);
  for (std::size_t i = 1; i < table.rows.size(); ++i) CHECK(table.rows[i].counts.tp <= table.rows[i - 1].counts.tp);
  for (const auto& o : table.outcomes[0])
    if (o.gold == GoldLabel::Other) CHECK(o.answer == kRefusal);
}
