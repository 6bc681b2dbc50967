// Command-line front end for the two-stage retrieval pipeline.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "lce/lce.hpp"

namespace {

using Entries = std::vector<std::pair<std::string, std::string>>;

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const auto& items, auto&& fmt) {
  std::string out;
  for (const auto& x : items) out += (out.empty() ? "" : ",") + fmt(x);
  return out;
}

void echo_config(const std::string& output, const std::string& command, Entries entries) {
  entries.insert(entries.begin(), {"command", command});
  lce::detail::write_text(output + ".config", lce::format_manifest(entries));
}

void note(const std::string& msg) { std::cerr << "lce: " << msg << '\n'; }

struct Common {
  unsigned threads = 1;
};

void add_threads(CLI::App* sub, Common& c) {
  sub->add_option("--threads", c.threads, "Worker threads; outputs do not depend on it")
      ->capture_default_str()
      ->check(CLI::Range(1u, 1024u));
}

// ---- index ------------------------------------------------------------------

struct IndexArgs {
  std::string corpus, format = "tsv4", output;
  Common common;
};

void run_index(const IndexArgs& a) {
  const auto corpus = lce::load_corpus(a.corpus, a.format);
  note("indexing " + std::to_string(corpus.size()) + " documents");
  const auto index = lce::build_index(corpus, {}, a.common.threads);
  lce::save_index(index, a.output);
  echo_config(a.output, "index", {{"corpus", a.corpus}, {"format", a.format}, {"output", a.output}});
}

// ---- retrieve ---------------------------------------------------------------

struct RetrieveArgs {
  std::string index, queries, output, qrels, retriever = "bm25", tag;
  std::optional<double> k1, b;
  double mu = 2500.0, alpha = 1.0;
  std::size_t top_k = 100;
  Common common;
};

void run_retrieve(const RetrieveArgs& a) {
  auto rc = lce::RetrieverConfig::defaults(lce::parse_retriever_kind(a.retriever));
  if (a.k1) rc.bm25_k1 = *a.k1;
  if (a.b) rc.bm25_b = *a.b;
  rc.ql_mu = a.mu;
  rc.oracle_alpha = a.alpha;
  rc.top_k = a.top_k;
  rc.validate();
  std::optional<lce::QrelSet> qrels;
  if (!a.qrels.empty()) qrels = lce::load_qrels(a.qrels);
  if (rc.kind == lce::RetrieverKind::oracle_mix && !qrels) throw lce::Error("oracle_mix needs --qrels");
  const auto index = lce::load_index(a.index);
  const auto queries = lce::load_queries(a.queries);
  note("retrieving " + std::to_string(queries.size()) + " queries with " + a.retriever);
  const auto run = lce::retrieve_all(index, queries, rc, qrels ? &*qrels : nullptr, a.common.threads);
  const auto tag = a.tag.empty() ? a.retriever : a.tag;
  lce::write_run(run, tag, a.output);
  echo_config(a.output, "retrieve",
              {{"index", a.index}, {"queries", a.queries}, {"qrels", a.qrels}, {"output", a.output},
               {"retriever", a.retriever}, {"k1", num(rc.bm25_k1)}, {"b", num(rc.bm25_b)}, {"mu", num(rc.ql_mu)},
               {"alpha", num(rc.oracle_alpha)}, {"top_k", std::to_string(rc.top_k)}, {"tag", tag}});
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string index, run, qrels, queries, output, log, objective = "lce";
  lce::TrainConfig train;
  lce::SamplerConfig sampler;
  bool fixed_groups = false;
  std::uint64_t seed = 0;
};

void add_train_options(CLI::App* sub, lce::TrainConfig& t, lce::SamplerConfig& s) {
  sub->add_option("--epochs", t.epochs)->capture_default_str();
  sub->add_option("--learning-rate", t.learning_rate)->capture_default_str();
  sub->add_option("--warmup-portion", t.warmup_portion)->capture_default_str();
  sub->add_option("--batch-queries", t.batch_queries)->capture_default_str();
  sub->add_option("--hidden", t.hidden)->capture_default_str();
  sub->add_option("--m", s.m, "Negative pool depth")->capture_default_str();
}

Entries train_entries(const lce::TrainConfig& t, const lce::SamplerConfig& s) {
  return {{"epochs", std::to_string(t.epochs)},
          {"learning_rate", num(t.learning_rate)},
          {"warmup_portion", num(t.warmup_portion)},
          {"batch_queries", std::to_string(t.batch_queries)},
          {"adam_beta1", num(t.adam_beta1)},
          {"adam_beta2", num(t.adam_beta2)},
          {"adam_epsilon", num(t.adam_epsilon)},
          {"hidden", std::to_string(t.hidden)},
          {"m", std::to_string(s.m)},
          {"resample_each_epoch", s.resample_each_epoch ? "true" : "false"}};
}

void run_train(TrainArgs a) {
  a.train.objective = lce::parse_objective(a.objective);
  a.train.seed = a.seed;
  a.sampler.seed = a.seed;
  a.sampler.resample_each_epoch = !a.fixed_groups;
  const auto index = lce::load_index(a.index);
  const auto rankings = lce::read_run(a.run);
  const auto qrels = lce::load_qrels(a.qrels);
  const auto queries = lce::load_queries(a.queries);
  note("training " + a.objective + " on " + std::to_string(rankings.size()) + " rankings");
  const auto result = lce::train(index, rankings, qrels, queries, a.train, a.sampler);
  const auto log_path = a.log.empty() ? a.output + ".log.csv" : a.log;
  lce::save_model(result.params, a.output);
  lce::detail::write_text(log_path, result.log.to_csv());
  Entries e{{"index", a.index}, {"run", a.run},       {"qrels", a.qrels},
            {"queries", a.queries}, {"output", a.output}, {"log", log_path},
            {"objective", a.objective}, {"group_size", std::to_string(a.sampler.group_size)},
            {"seed", std::to_string(a.seed)}};
  for (auto& kv : train_entries(a.train, a.sampler)) e.push_back(kv);
  echo_config(a.output, "train", e);
}

// ---- rerank -----------------------------------------------------------------

struct RerankArgs {
  std::string model, index, queries, run, output, tag = "rerank";
  std::size_t depth = 100;
  Common common;
};

void run_rerank(const RerankArgs& a) {
  const auto params = lce::load_model(a.model);
  const auto index = lce::load_index(a.index);
  const auto queries = lce::load_queries(a.queries);
  const auto candidates = lce::read_run(a.run);
  note("reranking " + std::to_string(candidates.size()) + " candidate lists");
  const auto out = lce::rerank_all(params, index, queries, candidates, a.depth, a.tag, a.common.threads);
  lce::write_run(out, a.tag, a.output);
  echo_config(a.output, "rerank",
              {{"model", a.model}, {"index", a.index}, {"queries", a.queries}, {"run", a.run}, {"output", a.output},
               {"depth", std::to_string(a.depth)}, {"tag", a.tag}});
}

// ---- eval / ttest -----------------------------------------------------------

struct EvalArgs {
  std::string run, qrels, output;
  std::size_t k = 100;
};

void run_eval(const EvalArgs& a) {
  const auto run = lce::read_run(a.run);
  const auto qrels = lce::load_qrels(a.qrels);
  const auto report = lce::mrr_at_k(run, qrels, a.k, a.run);
  if (report.excluded_queries > 0)
    note(std::to_string(report.excluded_queries) + " ranked queries without relevant judgments excluded");
  std::printf("MRR@%zu %.6f\n", a.k, report.mrr);
  if (!a.output.empty()) {
    lce::write_report(report, a.output);
    echo_config(a.output, "eval", {{"run", a.run}, {"qrels", a.qrels}, {"output", a.output}, {"k", std::to_string(a.k)}});
  }
}

struct TtestArgs {
  std::string a, b, output;
};

void run_ttest(const TtestArgs& a) {
  const auto r = lce::paired_t_test(lce::read_report(a.a), lce::read_report(a.b));
  char line[128];
  std::snprintf(line, sizeof line, "t=%.6f p=%.6g n=%zu\n", r.t, r.p, r.n);
  std::fputs(line, stdout);
  if (!a.output.empty()) {
    lce::detail::write_text(a.output, line);
    echo_config(a.output, "ttest", {{"a", a.a}, {"b", a.b}, {"output", a.output}});
  }
}

// ---- synthetic benchmark ----------------------------------------------------

void add_synth_options(CLI::App* sub, lce::SynthConfig& s) {
  sub->add_option("--n-queries", s.n_queries)->capture_default_str();
  sub->add_option("--n-dev-queries", s.n_dev_queries)->capture_default_str();
  sub->add_option("--n-docs", s.n_docs)->capture_default_str();
  sub->add_option("--topical-min", s.topical_min)->capture_default_str();
  sub->add_option("--topical-max", s.topical_max)->capture_default_str();
  sub->add_option("--topical-vocab", s.topical_vocab, "0 picks n_queries * topical_max")->capture_default_str();
  sub->add_option("--shared-vocab", s.shared_vocab)->capture_default_str();
  sub->add_option("--background-vocab", s.background_vocab)->capture_default_str();
  sub->add_option("--confounder-strength", s.confounder_strength)->capture_default_str();
  sub->add_option("--relevant-per-query", s.relevant_per_query)->capture_default_str();
  sub->add_option("--cluster-size", s.cluster_size)->capture_default_str();
  sub->add_option("--doc-length-mean", s.doc_length_mean)->capture_default_str();
  sub->add_option("--doc-length-sigma", s.doc_length_sigma)->capture_default_str();
  sub->add_option("--short-share", s.short_share)->capture_default_str();
  sub->add_option("--short-length-factor", s.short_length_factor)->capture_default_str();
  sub->add_option("--verbose-length-factor", s.verbose_length_factor)->capture_default_str();
  sub->add_option("--lookalike-share", s.lookalike_share)->capture_default_str();
  sub->add_option("--full-cover-confounder", s.full_cover_confounder)->capture_default_str();
  sub->add_option("--relevant-tf", s.relevant_tf)->capture_default_str();
  sub->add_option("--confounder-tf", s.confounder_tf)->capture_default_str();
  sub->add_option("--verbose-tf", s.verbose_tf)->capture_default_str();
  sub->add_option("--relevant-miss", s.relevant_miss)->capture_default_str();
  sub->add_option("--relevant-length-factor", s.relevant_length_factor)->capture_default_str();
  sub->add_option("--retrievable-depth", s.retrievable_depth, "0 disables the check")->capture_default_str();
  sub->add_option("--seed", s.seed, "Corpus seed")->capture_default_str();
}

Entries synth_entries(const lce::SynthConfig& s) {
  lce::PipelineConfig p;
  p.synth = s;
  Entries out;
  for (auto& [k, v] : lce::describe(p))
    if (k.starts_with("synth.")) out.emplace_back(k, v);
  return out;
}

struct SynthArgs {
  lce::SynthConfig synth;
  std::string output;
  std::string retrievable_by = "bm25_tuned";
};

std::string corpus_fingerprint(const lce::SynthData& d) {
  std::string all;
  for (const auto& doc : d.corpus) all += doc.doc_id + '\t' + doc.title + '\t' + doc.url + '\t' + doc.body + '\n';
  for (const auto& q : d.all_queries()) all += q.query_id + '\t' + q.text + '\n';
  for (const auto& [q, docs] : d.qrels.judgments())
    for (const auto& [doc, g] : docs) all += q + ' ' + doc + ' ' + std::to_string(g) + '\n';
  return lce::hex64(lce::fnv1a64(all));
}

void run_synth(SynthArgs a) {
  a.synth.retrievable_by = lce::parse_retriever_kind(a.retrievable_by);
  note("generating synthetic benchmark");
  const auto d = lce::generate_synth(a.synth);
  std::filesystem::create_directories(a.output);
  const std::filesystem::path dir(a.output);
  lce::write_corpus(d.corpus, (dir / "corpus.tsv").string());
  lce::write_queries(d.train_queries, (dir / "queries.train.tsv").string());
  lce::write_queries(d.dev_queries, (dir / "queries.dev.tsv").string());
  lce::write_qrels(d.train_qrels(), (dir / "qrels.train.tsv").string());
  lce::write_qrels(d.dev_qrels(), (dir / "qrels.dev.tsv").string());
  auto e = synth_entries(a.synth);
  e.emplace_back("output", a.output);
  e.emplace_back("fingerprint", corpus_fingerprint(d));
  echo_config(a.output, "synth", e);
}

// ---- sweep / crosspair ------------------------------------------------------

struct ExperimentArgs {
  lce::PipelineConfig config;
  std::string output, train_retriever = "bm25_tuned", test_retriever = "bm25_tuned", retrievable_by = "bm25_tuned";
  std::vector<std::size_t> sizes{2, 4, 8};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<std::string> retrievers{"ql_dirichlet", "bm25", "bm25_tuned", "oracle_mix"};
  std::vector<std::string> objectives{"vanilla", "lce"};
  bool fixed_groups = false;
};

void add_experiment_options(CLI::App* sub, ExperimentArgs& a) {
  add_synth_options(sub, a.config.synth);
  sub->add_option("--retrievable-by", a.retrievable_by)->capture_default_str();
  add_train_options(sub, a.config.train, a.config.sampler);
  sub->add_flag("--fixed-groups", a.fixed_groups, "Sample training groups once instead of every epoch");
  sub->add_option("--seeds", a.seeds, "Training seeds")->delimiter(',')->capture_default_str();
  sub->add_option("--top-k", a.config.top_k)->capture_default_str();
  sub->add_option("--rerank-depth", a.config.rerank_depth)->capture_default_str();
  sub->add_option("--eval-k", a.config.eval_k)->capture_default_str();
  sub->add_option("--oracle-alpha", a.config.oracle_alpha)->capture_default_str();
  sub->add_option("--output", a.output, "CSV output path")->required();
  sub->add_option("--threads", a.config.threads)->capture_default_str()->check(CLI::Range(1u, 1024u));
}

void finish_experiment_config(ExperimentArgs& a) {
  a.config.synth.retrievable_by = lce::parse_retriever_kind(a.retrievable_by);
  a.config.sampler.resample_each_epoch = !a.fixed_groups;
}

void write_manifest(const ExperimentArgs& a, const std::string& command, const lce::Benchmark& b,
                    const std::string& csv, Entries extra) {
  Entries e{{"command", command}};
  for (auto& kv : lce::describe(a.config)) e.push_back(kv);
  for (auto& kv : extra) e.push_back(kv);
  e.emplace_back("seeds", join(a.seeds, [](auto s) { return std::to_string(s); }));
  e.emplace_back("hash.corpus", corpus_fingerprint(b.data));
  e.emplace_back("hash.output", lce::hex64(lce::fnv1a64(csv)));
  lce::detail::write_text(a.output + ".manifest", lce::format_manifest(e));
}

void run_sweep(ExperimentArgs a) {
  finish_experiment_config(a);
  a.config.train_retriever = lce::parse_retriever_kind(a.train_retriever);
  a.config.test_retriever = lce::parse_retriever_kind(a.test_retriever);
  const std::vector<lce::RetrieverKind> kinds{a.config.train_retriever, a.config.test_retriever};
  note("preparing benchmark");
  const auto b = lce::prepare_benchmark(a.config, kinds);
  note("training " + std::to_string(a.sizes.size() * a.seeds.size()) + " rerankers");
  const auto result = lce::group_size_sweep(b, a.config, a.sizes, a.seeds);
  const auto csv = result.to_csv();
  lce::detail::write_text(a.output, csv);
  for (auto g : a.sizes) {
    const auto [mean, sd] = result.summary(g);
    char line[96];
    std::snprintf(line, sizeof line, "G=%zu MRR@%zu %.6f +- %.6f", g, a.config.eval_k, mean, sd);
    note(line);
  }
  write_manifest(a, "sweep", b, csv, {{"sizes", join(a.sizes, [](auto s) { return std::to_string(s); })}});
}

void run_crosspair(ExperimentArgs a) {
  finish_experiment_config(a);
  std::vector<lce::RetrieverKind> kinds;
  for (const auto& r : a.retrievers) kinds.push_back(lce::parse_retriever_kind(r));
  std::vector<lce::Objective> objectives;
  for (const auto& o : a.objectives) objectives.push_back(lce::parse_objective(o));
  note("preparing benchmark");
  const auto b = lce::prepare_benchmark(a.config, kinds);
  note("training " + std::to_string(kinds.size() * objectives.size() * a.seeds.size()) + " rerankers");
  const auto result = lce::crosspair_experiment(b, a.config, kinds, objectives, a.seeds);
  const auto csv = result.to_csv();
  lce::detail::write_text(a.output, csv);
  write_manifest(a, "crosspair", b, csv,
                 {{"retrievers", join(a.retrievers, [](const auto& s) { return s; })},
                  {"objectives", join(a.objectives, [](const auto& s) { return s; })}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage retrieval with localized contrastive reranker training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lce 1.0.0");

  IndexArgs index_args;
  auto* index = app.add_subcommand("index", "Build an inverted index from a corpus");
  index->add_option("--corpus", index_args.corpus)->required()->check(CLI::ExistingFile);
  index->add_option("--format", index_args.format)->capture_default_str();
  index->add_option("--output", index_args.output)->required();
  add_threads(index, index_args.common);
  index->callback([&] { run_index(index_args); });

  RetrieveArgs retrieve_args;
  auto* retrieve = app.add_subcommand("retrieve", "First-stage retrieval into a run file");
  retrieve->add_option("--index", retrieve_args.index)->required()->check(CLI::ExistingFile);
  retrieve->add_option("--queries", retrieve_args.queries)->required()->check(CLI::ExistingFile);
  retrieve->add_option("--output", retrieve_args.output)->required();
  retrieve->add_option("--retriever", retrieve_args.retriever)
      ->capture_default_str()
      ->check(CLI::IsMember({"bm25", "bm25_tuned", "ql_dirichlet", "oracle_mix"}));
  retrieve->add_option("--qrels", retrieve_args.qrels, "Judgments, required by oracle_mix")->check(CLI::ExistingFile);
  retrieve->add_option("--k1", retrieve_args.k1, "BM25 k1 (default depends on --retriever)");
  retrieve->add_option("--b", retrieve_args.b, "BM25 b (default depends on --retriever)");
  retrieve->add_option("--mu", retrieve_args.mu)->capture_default_str();
  retrieve->add_option("--alpha", retrieve_args.alpha)->capture_default_str();
  retrieve->add_option("--top-k", retrieve_args.top_k)->capture_default_str();
  retrieve->add_option("--tag", retrieve_args.tag, "Run tag (default: retriever name)");
  add_threads(retrieve, retrieve_args.common);
  retrieve->callback([&] { run_retrieve(retrieve_args); });

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a reranker on localized negatives");
  train->add_option("--index", train_args.index)->required()->check(CLI::ExistingFile);
  train->add_option("--run", train_args.run, "Train retriever run")->required()->check(CLI::ExistingFile);
  train->add_option("--qrels", train_args.qrels)->required()->check(CLI::ExistingFile);
  train->add_option("--queries", train_args.queries)->required()->check(CLI::ExistingFile);
  train->add_option("--output", train_args.output)->required();
  train->add_option("--log", train_args.log, "Training log CSV (default: <output>.log.csv)");
  train->add_option("--objective", train_args.objective)->capture_default_str()->check(CLI::IsMember({"lce", "vanilla"}));
  train->add_option("--group-size", train_args.sampler.group_size)->capture_default_str();
  add_train_options(train, train_args.train, train_args.sampler);
  train->add_flag("--fixed-groups", train_args.fixed_groups, "Sample training groups once instead of every epoch");
  train->add_option("--seed", train_args.seed)->capture_default_str();
  train->callback([&] { run_train(train_args); });

  RerankArgs rerank_args;
  auto* rerank = app.add_subcommand("rerank", "Rescore candidate lists with a trained model");
  rerank->add_option("--model", rerank_args.model)->required()->check(CLI::ExistingFile);
  rerank->add_option("--index", rerank_args.index)->required()->check(CLI::ExistingFile);
  rerank->add_option("--queries", rerank_args.queries)->required()->check(CLI::ExistingFile);
  rerank->add_option("--run", rerank_args.run, "Candidate run")->required()->check(CLI::ExistingFile);
  rerank->add_option("--output", rerank_args.output)->required();
  rerank->add_option("--depth", rerank_args.depth)->capture_default_str();
  rerank->add_option("--tag", rerank_args.tag)->capture_default_str();
  add_threads(rerank, rerank_args.common);
  rerank->callback([&] { run_rerank(rerank_args); });

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "MRR@k of a run");
  eval->add_option("--run", eval_args.run)->required()->check(CLI::ExistingFile);
  eval->add_option("--qrels", eval_args.qrels)->required()->check(CLI::ExistingFile);
  eval->add_option("--output", eval_args.output, "Per-query report CSV");
  eval->add_option("--k", eval_args.k)->capture_default_str()->check(CLI::PositiveNumber);
  eval->callback([&] { run_eval(eval_args); });

  TtestArgs ttest_args;
  auto* ttest = app.add_subcommand("ttest", "Paired t-test between two eval reports");
  ttest->add_option("--a", ttest_args.a)->required()->check(CLI::ExistingFile);
  ttest->add_option("--b", ttest_args.b)->required()->check(CLI::ExistingFile);
  ttest->add_option("--output", ttest_args.output);
  ttest->callback([&] { run_ttest(ttest_args); });

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark");
  add_synth_options(synth, synth_args.synth);
  synth->add_option("--retrievable-by", synth_args.retrievable_by)->capture_default_str();
  synth->add_option("--output", synth_args.output, "Output directory")->required();
  synth->callback([&] { run_synth(synth_args); });

  ExperimentArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "LCE group size sweep");
  add_experiment_options(sweep, sweep_args);
  sweep->add_option("--sizes", sweep_args.sizes)->delimiter(',')->capture_default_str();
  sweep->add_option("--train-retriever", sweep_args.train_retriever)->capture_default_str();
  sweep->add_option("--test-retriever", sweep_args.test_retriever)->capture_default_str();
  sweep->callback([&] { run_sweep(sweep_args); });

  ExperimentArgs cross_args;
  auto* cross = app.add_subcommand("crosspair", "Train/test retriever cross-pairing matrix");
  add_experiment_options(cross, cross_args);
  cross->add_option("--group-size", cross_args.config.sampler.group_size)->capture_default_str();
  cross->add_option("--retrievers", cross_args.retrievers)->delimiter(',')->capture_default_str();
  cross->add_option("--objectives", cross_args.objectives)->delimiter(',')->capture_default_str();
  cross->callback([&] { run_crosspair(cross_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "lce: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
