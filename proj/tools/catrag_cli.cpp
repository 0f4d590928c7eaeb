// catrag: build, train, query, evaluate and serve from the command line.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "catrag/catrag.hpp"
#include "catrag/config.hpp"
#include "catrag/error.hpp"
#include "catrag/eval.hpp"
#include "catrag/ingest.hpp"
#include "catrag/io_util.hpp"
#include "catrag/log.hpp"
#include "catrag/router.hpp"
#include "catrag/service.hpp"
#include "catrag/wire.hpp"

using namespace catrag;
using json = nlohmann::json;

namespace {

// Exit codes: 0 ok, 1 unexpected, 2 usage, then one per failure class.
int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::PersistenceError:
      return 3;
    case ErrorCode::DuplicateDocument:
    case ErrorCode::EmptyCorpus:
    case ErrorCode::EmptyDocument:
    case ErrorCode::InvalidChunking:
    case ErrorCode::InvalidDictionary:
      return 4;
    case ErrorCode::EmptyText:
    case ErrorCode::DimMismatch:
    case ErrorCode::ZeroVector:
      return 5;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::ProviderContract:
    case ErrorCode::RelationParse:
    case ErrorCode::GenerationUnavailable:
      return 6;
    case ErrorCode::EmptyTraining:
    case ErrorCode::DegenerateLabels:
    case ErrorCode::ModelVersionError:
    case ErrorCode::SplitInvalid:
      return 7;
    case ErrorCode::ChunkReattachment:
    case ErrorCode::UnknownChunk:
    case ErrorCode::ProvenanceViolation:
    case ErrorCode::GraphIntegrityError:
      return 8;
    case ErrorCode::EmptyQuery:
    case ErrorCode::EmptyEval:
      return 9;
    case ErrorCode::ConfigError:
      return 10;
  }
  return 1;
}

struct Options {
  // ingest
  std::string corpus, out, dict, stopwords;
  std::size_t size = 1000, overlap = 200;
  bool no_snap = false;
  // train-router / eval router
  std::string data;
  double split = 0.8;
  std::uint64_t seed = 0;
  TrainConfig train;
  // construct / query / serve / eval qa
  std::string config;
  std::string mode = "catrag";
  std::string question;
  bool as_json = false;
  std::optional<std::size_t> k_vec, k_graph;
  std::optional<double> sim_threshold, min_vec_score;
  // eval qa
  std::string items;
  std::vector<double> thresholds{0.6, 0.7, 0.8};
  std::vector<double> sweep;
  bool couple = false;
  int repeat = 1;
  std::size_t parallelism = 1;
  std::string csv_out, report_out;
  bool verbose = false, quiet = false;
};

void write_chunks(const std::vector<Chunk>& chunks, const std::filesystem::path& path) {
  std::string body;
  for (const auto& c : chunks) {
    json j{{"chunk_id", c.chunk_id}, {"doc_id", c.doc_id}, {"seq", c.seq},
           {"char_begin", c.char_begin}, {"char_end", c.char_end},
           {"text", c.text}, {"norm_text", c.norm_text}};
    body += j.dump();
    body += '\n';
  }
  io::write_file_atomic(path, body);
}

int cmd_ingest(const Options& o) {
  auto docs = load_corpus(o.corpus);
  AbbreviationDictionary dict;
  if (!o.dict.empty()) dict = AbbreviationDictionary::load(o.dict);
  Stopwords stop;
  if (!o.stopwords.empty()) stop = load_stopwords(o.stopwords);
  ChunkOptions chunking{o.size, o.overlap, !o.no_snap};
  std::vector<Chunk> all;
  for (const auto& d : docs) {
    auto cs = chunk_document(d, chunking, dict, stop);
    all.insert(all.end(), cs.begin(), cs.end());
  }
  write_chunks(all, o.out);
  std::printf("%zu documents, %zu chunks -> %s\n", docs.size(), all.size(), o.out.c_str());
  return 0;
}

int cmd_train(const Options& o) {
  auto examples = load_training_data(o.data);
  auto split = split_train_test(examples, o.split, o.seed);
  TrainConfig tc = o.train;
  tc.seed = o.seed;
  auto t0 = std::chrono::steady_clock::now();
  auto model = RouterModel::train(split.train, tc);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  model.save(o.out);
  auto ev = evaluate_router(model, split.test, secs);
  std::printf("train=%zu test=%zu labels=%zu rows=%zu\n", split.train.size(), split.test.size(),
              model.labels().size(), model.trained_rows());
  std::printf("accuracy=%.4f macro_f1=%.4f train_s=%.3f -> %s\n", ev.macro.accuracy, ev.macro.f1, secs,
              o.out.c_str());
  return 0;
}

EngineConfig load_config(const Options& o) { return EngineConfig::load(o.config); }

int cmd_construct(const Options& o) {
  auto cfg = load_config(o);
  cfg.require_construct_files();
  auto docs = load_corpus(cfg.corpus);
  auto router = RouterModel::load(cfg.router_model);
  auto resources = load_resources(cfg);
  auto providers = make_providers(cfg, resources);
  auto result = construct(docs, cfg.chunking, router, resources, providers);
  persist(result, cfg.graph, cfg.vstore);
  std::cout << result.report.to_string();
  std::printf("graph -> %s\nvstore -> %s\n", cfg.graph.c_str(), cfg.vstore.c_str());
  return 0;
}

RetrievalMode mode_of(const std::string& name) {
  auto m = parse_mode(name);
  if (!m) throw Error(ErrorCode::ConfigError, "unknown mode: " + name);
  return *m;
}

void print_result(const QueryResult& r) {
  std::printf("%s\n\n", r.answer.c_str());
  std::printf("mode: %s\n", std::string(to_string(r.mode)).c_str());
  if (r.label) std::printf("category: %s (%.4f)\n", r.label->name.c_str(), r.confidence);
  std::printf("vector hits:\n");
  for (const auto& h : r.vec_hits) std::printf("  %.4f  %s\n", h.score, h.chunk_id.c_str());
  std::printf("graph hits:\n");
  for (const auto& h : r.graph_hits) std::printf("  %.4f  %s\n", h.score, h.chunk_id.c_str());
  if (!r.entities.empty()) {
    std::printf("entities:");
    for (const auto& e : r.entities) std::printf(" [%s]", e.c_str());
    std::printf("\n");
  }
  if (!r.relations.empty()) {
    std::printf("relations:\n");
    for (const auto& t : r.relations) std::printf("  %s\n", format_relation(t).c_str());
  }
  std::printf("timings (ms): total %.3f", r.timings.total_ms);
  std::printf(" | normalize %.3f embed %.3f classify %.3f vector %.3f graph %.3f expand %.3f assemble %.3f generate %.3f\n",
              r.timings.normalize_ms, r.timings.embed_ms, r.timings.classify_ms, r.timings.vector_ms,
              r.timings.graph_ms, r.timings.expand_ms, r.timings.assemble_ms, r.timings.generate_ms);
}

QueryConfig query_config(const EngineConfig& cfg, const Options& o) {
  QueryConfig qc = cfg.query;
  qc.mode = mode_of(o.mode);
  if (o.k_vec) qc.k_vec = *o.k_vec;
  if (o.k_graph) qc.k_graph = *o.k_graph;
  if (o.sim_threshold) qc.sim_threshold = *o.sim_threshold;
  if (o.min_vec_score) qc.min_vec_score = *o.min_vec_score;
  qc.validate();
  return qc;
}

int cmd_query(const Options& o) {
  auto cfg = load_config(o);
  cfg.require_serving_files();
  auto engine = open_engine(cfg);
  auto qc = query_config(cfg, o);
  try {
    auto r = engine.query(o.question, qc);
    if (o.as_json)
      std::cout << wire::to_json(r, engine.graph()).dump(2) << "\n";
    else
      print_result(r);
  } catch (const GenerationFailure& f) {
    if (o.as_json) {
      json j = wire::error_envelope(to_string(f.code()), f.what());
      j["result"] = wire::to_json(f.evidence(), engine.graph());
      std::cout << j.dump(2) << "\n";
    } else {
      print_result(f.evidence());
    }
    throw;
  }
  return 0;
}

int cmd_serve(const Options& o) {
  auto cfg = load_config(o);
  cfg.require_serving_files();
  auto engine = std::make_shared<const Engine>(open_engine(cfg));
  Service service(engine, cfg);
  log::info("listening on " + cfg.server.host + ":" + std::to_string(cfg.server.port));
  if (!service.listen()) throw Error(ErrorCode::IoError, "cannot bind " + cfg.server.host + ":" +
                                                             std::to_string(cfg.server.port));
  return 0;
}

int cmd_eval_qa(const Options& o) {
  auto cfg = load_config(o);
  cfg.require_serving_files();
  auto engine = open_engine(cfg);
  auto items = load_qa_items(o.items);
  EmbeddingJudge judge(engine.providers().embedder);
  QueryFn fn = [&engine](std::string_view q, const QueryConfig& qc) { return engine.query(q, qc); };

  QAEvalOptions opt;
  opt.thresholds = o.thresholds;
  opt.query = cfg.query;
  if (o.k_vec) opt.query.k_vec = *o.k_vec;
  if (o.k_graph) opt.query.k_graph = *o.k_graph;
  if (o.sim_threshold) opt.query.sim_threshold = *o.sim_threshold;
  if (o.min_vec_score) opt.query.min_vec_score = *o.min_vec_score;
  opt.couple_graph_threshold = o.couple;
  opt.repeat = o.repeat;
  opt.parallelism = o.parallelism;

  auto run = [&](RetrievalMode m) {
    auto mo = opt;
    mo.query.mode = m;
    mo.query.validate();
    if (o.sweep.size() == 3) return sweep_thresholds(o.sweep[0], o.sweep[1], o.sweep[2], items, fn, judge, mo);
    return run_qa_eval(items, fn, judge, mo);
  };

  std::string text, csv;
  std::size_t failures = 0;
  std::optional<EvalTable> best_src;
  if (o.mode == "both") {
    auto cr = run(RetrievalMode::CatRag);
    auto r = run(RetrievalMode::Rag);
    text = render_paired(cr, r);
    csv = render_paired_csv(cr, r);
    failures = cr.failures() + r.failures();
    best_src = std::move(cr);
  } else {
    auto t = run(mode_of(o.mode));
    text = render_table(t);
    csv = render_csv(t);
    failures = t.failures();
    best_src = std::move(t);
  }
  std::cout << text;
  if (auto b = best_src->best_row())
    std::printf("best F1 threshold: %.2f (F1 %.4f)\n", best_src->rows[*b].threshold, best_src->rows[*b].metrics.f1);
  if (!o.csv_out.empty()) io::write_file_atomic(o.csv_out, csv);
  if (!o.report_out.empty()) io::write_file_atomic(o.report_out, text);
  if (failures > 0) {
    std::fprintf(stderr, "%zu failed queries\n", failures);
    return 11;
  }
  return 0;
}

int cmd_eval_router(const Options& o) {
  auto examples = load_training_data(o.data);
  auto split = split_train_test(examples, o.split, o.seed);
  TrainConfig tc = o.train;
  tc.seed = o.seed;

  auto t0 = std::chrono::steady_clock::now();
  MajorityBaseline majority(split.train);
  double base_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto base = evaluate_router(majority, split.test, base_s);

  t0 = std::chrono::steady_clock::now();
  auto model = RouterModel::train(split.train, tc);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto ev = evaluate_router(model, split.test, secs);

  char params[160];
  std::snprintf(params, sizeof params, "epoch=%d, wordNgrams=%d, dim=%zu", tc.epochs, tc.ngram_order, tc.dim);
  std::printf("split %.2f seed %llu: train=%zu test=%zu\n", o.split, static_cast<unsigned long long>(o.seed),
              split.train.size(), split.test.size());
  std::cout << render_router_header();
  std::cout << render_router_row(1, "Majority", "-", base);
  std::cout << render_router_row(2, "fastText-style", params, ev);
  std::cout << "\n" << render_router_classes(ev);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"catrag: category-guided hybrid retrieval over regulation documents"};
  app.require_subcommand(1);
  Options o;
  app.add_flag("-v,--verbose", o.verbose, "debug logging");
  app.add_flag("-q,--quiet", o.quiet, "errors only");

  auto* ingest = app.add_subcommand("ingest", "chunk and normalize a corpus into JSONL");
  ingest->add_option("--corpus", o.corpus, "directory of .txt/.md, or .jsonl")->required();
  ingest->add_option("--out", o.out, "output chunks.jsonl")->required();
  ingest->add_option("--dict", o.dict, "abbreviation dictionary (JSON object)");
  ingest->add_option("--stopwords", o.stopwords, "stopword list, one per line");
  ingest->add_option("--size", o.size, "chunk size in characters")->capture_default_str();
  ingest->add_option("--overlap", o.overlap, "chunk overlap in characters")->capture_default_str();
  ingest->add_flag("--no-snap", o.no_snap, "do not snap chunk ends to whitespace");

  auto add_train_opts = [&o](CLI::App* sub) {
    sub->add_option("--data", o.data, "labels.jsonl")->required();
    sub->add_option("--split", o.split, "train fraction")->capture_default_str();
    sub->add_option("--seed", o.seed, "shuffle and init seed")->capture_default_str();
    sub->add_option("--epochs", o.train.epochs)->capture_default_str();
    sub->add_option("--ngrams", o.train.ngram_order, "word n-gram order")->capture_default_str();
    sub->add_option("--dim", o.train.dim)->capture_default_str();
    sub->add_option("--buckets", o.train.bucket_count)->capture_default_str();
    sub->add_option("--lr", o.train.lr_start)->capture_default_str();
    sub->add_option("--min-count", o.train.min_count)->capture_default_str();
  };
  auto* train = app.add_subcommand("train-router", "train the category router");
  add_train_opts(train);
  train->add_option("--out", o.out, "model file")->required();

  auto* cons = app.add_subcommand("construct", "build graph and vector store");
  cons->add_option("--config", o.config)->required()->check(CLI::ExistingFile);

  auto add_query_opts = [&o](CLI::App* sub) {
    sub->add_option("--k-vec", o.k_vec);
    sub->add_option("--k-graph", o.k_graph);
    sub->add_option("--sim-threshold", o.sim_threshold);
    sub->add_option("--min-vec-score", o.min_vec_score, "drop vector hits scoring below this");
  };
  auto* query = app.add_subcommand("query", "answer one question");
  query->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
  query->add_option("--mode", o.mode)->check(CLI::IsMember({"catrag", "rag"}))->capture_default_str();
  query->add_flag("--json", o.as_json, "print the full result as JSON");
  add_query_opts(query);
  query->add_option("question", o.question)->required();

  auto* eval = app.add_subcommand("eval", "evaluation harnesses");
  eval->require_subcommand(1);
  auto* qa = eval->add_subcommand("qa", "threshold table over a QA set");
  qa->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
  qa->add_option("--items", o.items, "qa.jsonl")->required();
  qa->add_option("--thresholds", o.thresholds, "judge thresholds")->delimiter(',');
  qa->add_option("--sweep", o.sweep, "lo,hi,step grid")->delimiter(',')->expected(3);
  qa->add_option("--mode", o.mode)->check(CLI::IsMember({"catrag", "rag", "both"}))->capture_default_str();
  qa->add_flag("--couple-threshold", o.couple, "use each threshold as the graph threshold too");
  qa->add_option("--repeat", o.repeat, "runs per query for latency")->check(CLI::PositiveNumber);
  qa->add_option("--parallelism", o.parallelism)->check(CLI::PositiveNumber);
  qa->add_option("--csv", o.csv_out, "write CSV report");
  qa->add_option("--report", o.report_out, "write text report");
  add_query_opts(qa);
  auto* er = eval->add_subcommand("router", "router vs majority baseline");
  add_train_opts(er);

  auto* serve = app.add_subcommand("serve", "HTTP JSON service");
  serve->add_option("--config", o.config)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  log::set_level(o.verbose ? log::Level::Debug : o.quiet ? log::Level::Error : log::Level::Info);

  try {
    if (*ingest) return cmd_ingest(o);
    if (*train) return cmd_train(o);
    if (*cons) return cmd_construct(o);
    if (*query) return cmd_query(o);
    if (*qa) return cmd_eval_qa(o);
    if (*er) return cmd_eval_router(o);
    if (*serve) return cmd_serve(o);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
