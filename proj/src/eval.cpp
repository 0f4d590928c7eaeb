#include "catrag/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "catrag/error.hpp"
#include "catrag/io_util.hpp"

namespace catrag {

namespace {

using Clock = std::chrono::steady_clock;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string pct(double v) { return fixed(100.0 * v, 2); }

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

std::vector<ItemOutcome> run_items(std::span<const QAItem> items, const QueryFn& system, const AnswerJudge& judge,
                                   const QueryConfig& query, int repeat, std::size_t parallelism) {
  std::vector<ItemOutcome> out(items.size());
  auto run_one = [&](std::size_t i) {
    const auto& item = items[i];
    auto& o = out[i];
    o.question = item.question;
    o.gold = item.gold;
    double latency = 0.0;
    try {
      for (int rep = 0; rep < std::max(1, repeat); ++rep) {
        const auto started = Clock::now();
        auto result = system(item.question, query);
        latency += std::chrono::duration<double, std::milli>(Clock::now() - started).count();
        if (rep == 0) {
          o.answer = std::move(result.answer);
          o.graph_hits = result.graph_hits.size();
          o.entities = result.entities.size();
          o.relations = result.relations.size();
        }
      }
      o.latency_ms = latency / std::max(1, repeat);
      o.similarity = judge.similarity(o.answer, item.reference_answer);
    } catch (const std::exception& e) {
      o.failed = true;
      o.error = e.what();
    }
  };

  if (parallelism <= 1) {
    for (std::size_t i = 0; i < items.size(); ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < std::min(parallelism, items.size()); ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < items.size(); i = next++) run_one(i);
    });
  }
  for (auto& t : workers) t.join();
  return out;
}

EvalRow tally(double threshold, RetrievalMode mode, const std::vector<ItemOutcome>& outcomes, double wall_seconds,
              bool report_latency) {
  EvalRow row;
  row.threshold = threshold;
  row.mode = mode;
  row.wall_seconds = wall_seconds;
  double latency = 0.0;
  std::size_t ok = 0;
  for (const auto& o : outcomes) {
    if (o.failed) {
      ++row.failures;
      continue;
    }
    ++ok;
    latency += o.latency_ms;
    row.graph_hits += o.graph_hits;
    row.entities += o.entities;
    row.relations += o.relations;
    const bool positive = o.similarity >= threshold;
    if (o.gold == GoldLabel::Truth) {
      positive ? ++row.counts.tp : ++row.counts.fn;
    } else {
      positive ? ++row.counts.fp : ++row.counts.tn;
    }
  }
  if (row.counts.total() > 0) row.metrics = metrics_from_counts(row.counts);
  if (report_latency && ok > 0) row.mean_latency_ms = latency / static_cast<double>(ok);
  return row;
}

std::string latency_cell(const EvalRow& row) {
  return row.mean_latency_ms ? fixed(*row.mean_latency_ms, 2) : std::string("--");
}

}  // namespace

std::vector<QAItem> load_qa_items(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::vector<QAItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    try {
      const auto rec = nlohmann::json::parse(line);
      QAItem item;
      item.question = rec.at("question").get<std::string>();
      item.reference_answer = rec.value("reference_answer", std::string());
      const auto label = rec.at("label").get<std::string>();
      if (label == "Truth") {
        item.gold = GoldLabel::Truth;
      } else if (label == "Other") {
        item.gold = GoldLabel::Other;
      } else {
        throw Error(ErrorCode::IoError, where + ": label must be Truth or Other");
      }
      if (item.question.empty()) throw Error(ErrorCode::IoError, where + ": empty question");
      if (item.gold == GoldLabel::Truth && item.reference_answer.empty()) {
        throw Error(ErrorCode::IoError, where + ": Truth item without reference_answer");
      }
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::IoError, where + ": " + e.what());
    }
  }
  if (items.empty()) throw Error(ErrorCode::EmptyEval, "no QA items in " + path.string());
  return items;
}

double f1_score(double precision, double recall) noexcept {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

EvalMetrics metrics_from_counts(const ConfusionCounts& c) {
  const auto total = c.total();
  if (total == 0) throw Error(ErrorCode::EmptyEval, "no confusion counts");
  EvalMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
  if (c.tp + c.fp > 0) {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  } else {
    m.degenerate_precision = true;
  }
  if (c.tp + c.fn > 0) {
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  } else {
    m.degenerate_recall = true;
  }
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

double EmbeddingJudge::similarity(std::string_view generated, std::string_view reference) const {
  if (generated.empty() || reference.empty()) return -1.0;
  const std::vector<std::string> texts{std::string(generated), std::string(reference)};
  const auto v = embed_texts(*embedder_, texts);
  return cosine(v[0], v[1]);
}

bool judge(std::string_view generated, std::string_view reference, double threshold, const AnswerJudge& j) {
  if (generated.empty()) return false;
  return j.similarity(generated, reference) >= threshold;
}

std::optional<std::size_t> EvalTable::best_row() const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!best || rows[i].metrics.f1 > rows[*best].metrics.f1 ||
        (rows[i].metrics.f1 == rows[*best].metrics.f1 && rows[i].threshold < rows[*best].threshold)) {
      best = i;
    }
  }
  return best;
}

std::size_t EvalTable::failures() const noexcept {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.failures;
  return n;
}

EvalTable run_qa_eval(std::span<const QAItem> items, const QueryFn& system, const AnswerJudge& judge,
                      const QAEvalOptions& options) {
  if (items.empty()) throw Error(ErrorCode::EmptyEval, "no QA items");
  if (options.thresholds.empty()) throw Error(ErrorCode::ConfigError, "no thresholds given");
  const bool report_latency = options.parallelism <= 1;

  EvalTable table;
  if (!options.couple_graph_threshold) {
    const auto started = Clock::now();
    auto outcomes = run_items(items, system, judge, options.query, options.repeat, options.parallelism);
    const double wall = std::chrono::duration<double>(Clock::now() - started).count();
    for (double t : options.thresholds) {
      table.rows.push_back(tally(t, options.query.mode, outcomes, wall, report_latency));
      table.outcomes.push_back(outcomes);
    }
    return table;
  }
  for (double t : options.thresholds) {
    auto query = options.query;
    query.sim_threshold = t;
    const auto started = Clock::now();
    auto outcomes = run_items(items, system, judge, query, options.repeat, options.parallelism);
    const double wall = std::chrono::duration<double>(Clock::now() - started).count();
    table.rows.push_back(tally(t, options.query.mode, outcomes, wall, report_latency));
    table.outcomes.push_back(std::move(outcomes));
  }
  return table;
}

std::vector<double> threshold_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(lo <= hi)) throw Error(ErrorCode::ConfigError, "threshold grid needs lo <= hi and step > 0");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid;
  grid.reserve(n);
  for (std::size_t i = 0; i < n; ++i) grid.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
  return grid;
}

EvalTable sweep_thresholds(double lo, double hi, double step, std::span<const QAItem> items, const QueryFn& system,
                           const AnswerJudge& judge, QAEvalOptions options) {
  options.thresholds = threshold_grid(lo, hi, step);
  return run_qa_eval(items, system, judge, options);
}

std::string render_table(const EvalTable& table) {
  std::ostringstream os;
  os << "mode    threshold  accuracy precision   recall       f1   tp   fp   fn   tn fail  wall(s)  mean(ms)\n";
  for (const auto& r : table.rows) {
    os << std::string(to_string(r.mode)) << std::string(8 - to_string(r.mode).size(), ' ') << pad(fixed(r.threshold, 2), 9)
       << pad(pct(r.metrics.accuracy), 10) << pad(pct(r.metrics.precision), 10) << pad(pct(r.metrics.recall), 9)
       << pad(pct(r.metrics.f1), 9) << pad(std::to_string(r.counts.tp), 5) << pad(std::to_string(r.counts.fp), 5)
       << pad(std::to_string(r.counts.fn), 5) << pad(std::to_string(r.counts.tn), 5)
       << pad(std::to_string(r.failures), 5) << pad(fixed(r.wall_seconds, 3), 9) << pad(latency_cell(r), 10) << "\n";
  }
  if (auto best = table.best_row()) {
    os << "best F1 at threshold " << fixed(table.rows[*best].threshold, 2) << " (" << pct(table.rows[*best].metrics.f1)
       << ")\n";
  }
  return os.str();
}

std::string render_csv(const EvalTable& table) {
  std::ostringstream os;
  os << "mode,threshold,accuracy,precision,recall,f1,tp,fp,fn,tn,failures,wall_seconds,mean_latency_ms,graph_hits,"
        "entities,relations\n";
  for (const auto& r : table.rows) {
    os << to_string(r.mode) << ',' << fixed(r.threshold, 4) << ',' << fixed(r.metrics.accuracy, 6) << ','
       << fixed(r.metrics.precision, 6) << ',' << fixed(r.metrics.recall, 6) << ',' << fixed(r.metrics.f1, 6) << ','
       << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ',' << r.counts.tn << ',' << r.failures << ','
       << fixed(r.wall_seconds, 6) << ',' << (r.mean_latency_ms ? fixed(*r.mean_latency_ms, 3) : std::string()) << ','
       << r.graph_hits << ',' << r.entities << ',' << r.relations << "\n";
  }
  return os.str();
}

std::string render_paired(const EvalTable& cr, const EvalTable& rag) {
  if (cr.rows.size() != rag.rows.size()) {
    throw Error(ErrorCode::ConfigError, "paired tables need the same thresholds");
  }
  auto pair = [](const std::string& a, const std::string& b) { return pad(a, 7) + " | " + pad(b, 7); };
  std::ostringstream os;
  os << "threshold |      Accuracy     |     Precision     |      Recall       |     F1 Score      |"
        "   Mean latency ms  | Graph evidence (hits/ent/rel)\n";
  os << "          |      (CR | R)     |      (CR | R)     |      (CR | R)     |      (CR | R)     |"
        "      (CR | R)      |      (CR | R)\n";
  for (std::size_t i = 0; i < cr.rows.size(); ++i) {
    const auto& a = cr.rows[i];
    const auto& b = rag.rows[i];
    auto evidence = [](const EvalRow& r) {
      return std::to_string(r.graph_hits) + "/" + std::to_string(r.entities) + "/" + std::to_string(r.relations);
    };
    os << pad(fixed(a.threshold, 2), 9) << " | " << pair(pct(a.metrics.accuracy), pct(b.metrics.accuracy)) << " | "
       << pair(pct(a.metrics.precision), pct(b.metrics.precision)) << " | "
       << pair(pct(a.metrics.recall), pct(b.metrics.recall)) << " | " << pair(pct(a.metrics.f1), pct(b.metrics.f1))
       << " | " << pair(latency_cell(a), latency_cell(b)) << "  | " << evidence(a) << " | " << evidence(b) << "\n";
  }
  return os.str();
}

std::string render_paired_csv(const EvalTable& cr, const EvalTable& rag) {
  std::ostringstream os;
  os << "threshold,accuracy_cr,accuracy_r,precision_cr,precision_r,recall_cr,recall_r,f1_cr,f1_r,"
        "mean_latency_ms_cr,mean_latency_ms_r,graph_hits_cr,graph_hits_r,failures_cr,failures_r\n";
  for (std::size_t i = 0; i < cr.rows.size() && i < rag.rows.size(); ++i) {
    const auto& a = cr.rows[i];
    const auto& b = rag.rows[i];
    auto lat = [](const EvalRow& r) { return r.mean_latency_ms ? fixed(*r.mean_latency_ms, 3) : std::string(); };
    os << fixed(a.threshold, 4) << ',' << fixed(a.metrics.accuracy, 6) << ',' << fixed(b.metrics.accuracy, 6) << ','
       << fixed(a.metrics.precision, 6) << ',' << fixed(b.metrics.precision, 6) << ',' << fixed(a.metrics.recall, 6)
       << ',' << fixed(b.metrics.recall, 6) << ',' << fixed(a.metrics.f1, 6) << ',' << fixed(b.metrics.f1, 6) << ','
       << lat(a) << ',' << lat(b) << ',' << a.graph_hits << ',' << b.graph_hits << ',' << a.failures << ','
       << b.failures << "\n";
  }
  return os.str();
}

RouterEvaluation evaluate_router(const LabelPredictor& model, std::span<const TrainingExample> testset,
                                 double train_seconds) {
  if (testset.empty()) throw Error(ErrorCode::EmptyEval, "empty router test set");
  RouterEvaluation ev;
  ev.train_seconds = train_seconds;
  ev.test_size = testset.size();

  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0, support = 0;
  };
  std::map<std::string, Counts> per;
  std::size_t correct = 0;
  const auto started = Clock::now();
  for (const auto& ex : testset) {
    const auto predicted = model.predict_label(ex.text);
    ++per[ex.label].support;
    if (predicted == ex.label) {
      ++correct;
      ++per[ex.label].tp;
    } else {
      ++per[ex.label].fn;
      ++per[predicted].fp;
    }
  }
  ev.test_seconds = std::chrono::duration<double>(Clock::now() - started).count();

  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (const auto& [label, c] : per) {
    ClassReport row{label, 0.0, 0.0, 0.0, c.support};
    if (c.tp + c.fp > 0) row.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) row.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    row.f1 = f1_score(row.precision, row.recall);
    p_sum += row.precision;
    r_sum += row.recall;
    f_sum += row.f1;
    ev.per_class.push_back(std::move(row));
  }
  const auto k = static_cast<double>(per.size());
  ev.macro.accuracy = static_cast<double>(correct) / static_cast<double>(testset.size());
  ev.macro.precision = p_sum / k;
  ev.macro.recall = r_sum / k;
  ev.macro.f1 = f_sum / k;
  return ev;
}

std::string render_router_header() {
  return "  # | Model              | Params                         | Accuracy | Precision |  Recall |      F1 |"
         " Train (s) | Test (s)\n";
}

std::string render_router_row(std::size_t index, std::string_view model, std::string_view params,
                              const RouterEvaluation& ev) {
  auto left = [](std::string_view s, std::size_t w) {
    std::string out(s);
    if (out.size() < w) out.append(w - out.size(), ' ');
    return out;
  };
  std::ostringstream os;
  os << pad(std::to_string(index), 3) << " | " << left(model, 18) << " | " << left(params, 30) << " | "
     << pad(pct(ev.macro.accuracy), 8) << " | " << pad(pct(ev.macro.precision), 9) << " | "
     << pad(pct(ev.macro.recall), 7) << " | " << pad(pct(ev.macro.f1), 7) << " | " << pad(fixed(ev.train_seconds, 4), 9)
     << " | " << pad(fixed(ev.test_seconds, 4), 8) << "\n";
  return os.str();
}

std::string render_router_classes(const RouterEvaluation& ev) {
  std::ostringstream os;
  os << "class                              precision   recall       f1  support\n";
  for (const auto& c : ev.per_class) {
    std::string name = c.label;
    if (name.size() < 32) name.append(32 - name.size(), ' ');
    os << name << pad(pct(c.precision), 11) << pad(pct(c.recall), 9) << pad(pct(c.f1), 9)
       << pad(std::to_string(c.support), 9) << "\n";
  }
  return os.str();
}

}  // namespace catrag
