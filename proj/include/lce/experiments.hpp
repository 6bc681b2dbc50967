#ifndef LCE_EXPERIMENTS_HPP
#define LCE_EXPERIMENTS_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "lce/corpus_io.hpp"
#include "lce/error.hpp"
#include "lce/evaluation.hpp"
#include "lce/inverted_index.hpp"
#include "lce/retrieval.hpp"
#include "lce/synth.hpp"
#include "lce/training.hpp"

namespace lce {

/// Benchmark training schedule; longer and faster than the TrainConfig
/// defaults so the small scorer converges on the synthetic corpus.
inline constexpr std::size_t kBenchmarkEpochs = 15;
inline constexpr double kBenchmarkLearningRate = 3e-3;

inline TrainConfig benchmark_train_config() {
  TrainConfig t;
  t.epochs = kBenchmarkEpochs;
  t.learning_rate = kBenchmarkLearningRate;
  return t;
}

struct PipelineConfig {
  SynthConfig synth;
  SamplerConfig sampler;
  TrainConfig train = benchmark_train_config();
  RetrieverKind train_retriever = RetrieverKind::bm25_tuned;
  RetrieverKind test_retriever = RetrieverKind::bm25_tuned;
  std::size_t top_k = 100;
  std::size_t rerank_depth = 100;
  std::size_t eval_k = 100;
  double oracle_alpha = 1.0;
  unsigned threads = 1;

  RetrieverConfig retriever(RetrieverKind kind) const {
    auto c = RetrieverConfig::defaults(kind);
    c.top_k = top_k;
    c.oracle_alpha = oracle_alpha;
    return c;
  }
};

/// Flat key=value description of a pipeline configuration.
inline std::vector<std::pair<std::string, std::string>> describe(const PipelineConfig& c) {
  auto num = [](double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto u = [](std::uint64_t v) { return std::to_string(v); };
  const auto& s = c.synth;
  return {
      {"synth.n_queries", u(s.n_queries)},
      {"synth.n_dev_queries", u(s.n_dev_queries)},
      {"synth.n_docs", u(s.n_docs)},
      {"synth.topical_min", u(s.topical_min)},
      {"synth.topical_max", u(s.topical_max)},
      {"synth.topical_vocab", u(s.effective_topical_vocab())},
      {"synth.shared_vocab", u(s.shared_vocab)},
      {"synth.background_vocab", u(s.background_vocab)},
      {"synth.confounder_strength", num(s.confounder_strength)},
      {"synth.relevant_per_query", u(s.relevant_per_query)},
      {"synth.cluster_size", u(s.cluster_size)},
      {"synth.doc_length_mean", num(s.doc_length_mean)},
      {"synth.doc_length_sigma", num(s.doc_length_sigma)},
      {"synth.short_share", num(s.short_share)},
      {"synth.short_length_factor", num(s.short_length_factor)},
      {"synth.verbose_length_factor", num(s.verbose_length_factor)},
      {"synth.lookalike_share", num(s.lookalike_share)},
      {"synth.full_cover_confounder", num(s.full_cover_confounder)},
      {"synth.relevant_tf", num(s.relevant_tf)},
      {"synth.confounder_tf", num(s.confounder_tf)},
      {"synth.verbose_tf", num(s.verbose_tf)},
      {"synth.relevant_miss", num(s.relevant_miss)},
      {"synth.relevant_length_factor", num(s.relevant_length_factor)},
      {"synth.retrievable_depth", u(s.retrievable_depth)},
      {"synth.retrievable_by", std::string(to_string(s.retrievable_by))},
      {"synth.seed", u(s.seed)},
      {"sampler.m", u(c.sampler.m)},
      {"sampler.group_size", u(c.sampler.group_size)},
      {"sampler.resample_each_epoch", c.sampler.resample_each_epoch ? "true" : "false"},
      {"train.objective", std::string(to_string(c.train.objective))},
      {"train.epochs", u(c.train.epochs)},
      {"train.learning_rate", num(c.train.learning_rate)},
      {"train.warmup_portion", num(c.train.warmup_portion)},
      {"train.batch_queries", u(c.train.batch_queries)},
      {"train.hidden", u(c.train.hidden)},
      {"train_retriever", std::string(to_string(c.train_retriever))},
      {"test_retriever", std::string(to_string(c.test_retriever))},
      {"top_k", u(c.top_k)},
      {"rerank_depth", u(c.rerank_depth)},
      {"eval_k", u(c.eval_k)},
      {"oracle_alpha", num(c.oracle_alpha)},
  };
}

/// 64-bit FNV-1a, used to fingerprint artifacts in manifests.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string format_manifest(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + "=" + v + "\n";
  return out;
}

/// Runs fn(0..n-1) on up to `threads` workers. Each index writes only its own
/// output slot, so results do not depend on scheduling.
inline void run_jobs(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---- benchmark ----------------------------------------------------------

/// Synthetic corpus, its index, and first-stage rankings of both query splits.
struct Benchmark {
  SynthData data;
  InvertedIndex index;
  QrelSet dev_qrels;
  std::map<RetrieverKind, std::vector<Ranking>> train_rankings;
  std::map<RetrieverKind, std::vector<Ranking>> dev_rankings;

  const std::vector<Ranking>& train_run(RetrieverKind k) const {
    auto it = train_rankings.find(k);
    if (it == train_rankings.end()) throw Error("benchmark lacks train rankings for " + std::string(to_string(k)));
    return it->second;
  }
  const std::vector<Ranking>& dev_run(RetrieverKind k) const {
    auto it = dev_rankings.find(k);
    if (it == dev_rankings.end()) throw Error("benchmark lacks dev rankings for " + std::string(to_string(k)));
    return it->second;
  }
};

inline Benchmark prepare_benchmark(const PipelineConfig& config, std::span<const RetrieverKind> kinds) {
  Benchmark b;
  b.data = generate_synth(config.synth);
  b.index = build_index(b.data.corpus, {}, config.threads);
  b.dev_qrels = b.data.dev_qrels();
  for (auto k : kinds) {
    if (b.train_rankings.contains(k)) continue;
    const auto rc = config.retriever(k);
    b.train_rankings[k] = retrieve_all(b.index, b.data.train_queries, rc, &b.data.qrels, config.threads);
    b.dev_rankings[k] = retrieve_all(b.index, b.data.dev_queries, rc, &b.data.qrels, config.threads);
  }
  return b;
}

struct CellSpec {
  Objective objective = Objective::lce;
  RetrieverKind train_retriever = RetrieverKind::bm25_tuned;
  RetrieverKind test_retriever = RetrieverKind::bm25_tuned;
  std::size_t group_size = 8;
  std::uint64_t seed = 0;
};

/// Training configuration of one cell: the cell seed drives both the
/// scorer (initialization, batch order) and the negative sampler.
inline std::pair<TrainConfig, SamplerConfig> cell_configs(const PipelineConfig& config, const CellSpec& cell) {
  auto tc = config.train;
  tc.objective = cell.objective;
  tc.seed = cell.seed;
  auto sc = config.sampler;
  sc.group_size = cell.group_size;
  sc.seed = cell.seed;
  return {tc, sc};
}

inline ScorerParams train_cell(const Benchmark& b, const PipelineConfig& config, const CellSpec& cell) {
  const auto [tc, sc] = cell_configs(config, cell);
  return train(b.index, b.train_run(cell.train_retriever), b.data.qrels, b.data.train_queries, tc, sc).params;
}

inline EvalReport evaluate_cell(const Benchmark& b, const PipelineConfig& config, const ScorerParams& params,
                                RetrieverKind test_retriever) {
  const auto reranked =
      rerank_all(params, b.index, b.data.dev_queries, b.dev_run(test_retriever), config.rerank_depth, "rerank");
  return mrr_at_k(reranked, b.dev_qrels, config.eval_k);
}

/// Train on the cell's train retriever, rerank the dev candidates of its test
/// retriever, and score MRR@k.
inline EvalReport run_cell(const Benchmark& b, const PipelineConfig& config, const CellSpec& cell) {
  return evaluate_cell(b, config, train_cell(b, config, cell), cell.test_retriever);
}

/// Concatenates per-query reciprocal ranks of several runs, keyed "<run>/<query>".
inline EvalReport pool_reports(std::span<const EvalReport> reports) {
  EvalReport pooled;
  double sum = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    pooled.k = reports[i].k;
    for (const auto& [q, rr] : reports[i].reciprocal_ranks) {
      pooled.reciprocal_ranks.emplace(std::to_string(i) + "/" + q, rr);
      sum += rr;
    }
  }
  pooled.mrr = pooled.reciprocal_ranks.empty() ? 0.0 : sum / static_cast<double>(pooled.reciprocal_ranks.size());
  return pooled;
}

// ---- group size sweep -------------------------------------------------------

struct SweepRow {
  std::size_t group_size = 0;
  std::uint64_t seed = 0;
  double mrr = 0.0;
  EvalReport report;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sizes outer, seeds inner

  std::string to_csv() const {
    std::string out = "group_size,seed,mrr\n";
    char buf[96];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g\n", r.group_size, static_cast<unsigned long long>(r.seed), r.mrr);
      out += buf;
    }
    return out;
  }

  /// Mean and standard deviation over seeds for one group size.
  std::pair<double, double> summary(std::size_t group_size) const {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.group_size == group_size) v.push_back(r.mrr);
    if (v.empty()) throw Error("no sweep rows for group size " + std::to_string(group_size));
    double mean = 0;
    for (auto x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0;
    for (auto x : v) ss += (x - mean) * (x - mean);
    return {mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
  }

  double mrr(std::size_t group_size, std::uint64_t seed) const {
    for (const auto& r : rows)
      if (r.group_size == group_size && r.seed == seed) return r.mrr;
    throw Error("no sweep cell for the requested size and seed");
  }
};

/// LCE rerankers trained per (group size, seed) on the configured train
/// retriever, all evaluated against the configured test retriever.
inline SweepResult group_size_sweep(const Benchmark& b, const PipelineConfig& config,
                                    std::span<const std::size_t> sizes, std::span<const std::uint64_t> seeds) {
  if (sizes.empty() || seeds.empty()) throw Error("sweep needs at least one size and one seed");
  for (auto g : sizes) {
    auto sc = config.sampler;
    sc.group_size = g;
    sc.validate();
  }
  SweepResult result;
  for (auto g : sizes)
    for (auto s : seeds) result.rows.push_back({g, s, 0.0, {}});
  run_jobs(result.rows.size(), config.threads, [&](std::size_t i) {
    auto& row = result.rows[i];
    CellSpec cell{Objective::lce, config.train_retriever, config.test_retriever, row.group_size, row.seed};
    row.report = run_cell(b, config, cell);
    row.mrr = row.report.mrr;
  });
  return result;
}

// ---- train/test retriever cross-pairing --------------------------------

struct CrosspairCell {
  Objective objective = Objective::lce;
  RetrieverKind train_retriever = RetrieverKind::bm25;
  RetrieverKind test_retriever = RetrieverKind::bm25;
  double mrr = 0.0;              // mean over seeds
  double p_vs_diagonal = 1.0;    // against (test, test) of the same objective, pooled over seeds
  double t_vs_diagonal = 0.0;
  EvalReport pooled;             // per-query reciprocal ranks pooled over seeds
};

struct CrosspairResult {
  std::vector<RetrieverKind> retrievers;
  std::vector<Objective> objectives;
  std::vector<CrosspairCell> cells;  // objective, then train retriever, then test retriever

  const CrosspairCell& at(Objective o, RetrieverKind train_r, RetrieverKind test_r) const {
    for (const auto& c : cells)
      if (c.objective == o && c.train_retriever == train_r && c.test_retriever == test_r) return c;
    throw Error("no crosspair cell for the requested coordinates");
  }

  std::string to_csv() const {
    std::string out = "objective,train_retriever,test_retriever,mrr,p_vs_diagonal\n";
    char buf[64];
    for (const auto& c : cells) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", c.mrr, c.p_vs_diagonal);
      out += std::string(to_string(c.objective)) + "," + std::string(to_string(c.train_retriever)) + "," +
             std::string(to_string(c.test_retriever)) + buf;
    }
    return out;
  }
};

/// Trains one reranker per (objective, train retriever, seed) and evaluates it
/// on the dev candidates of every test retriever.
inline CrosspairResult crosspair_experiment(const Benchmark& b, const PipelineConfig& config,
                                            std::span<const RetrieverKind> retrievers,
                                            std::span<const Objective> objectives,
                                            std::span<const std::uint64_t> seeds) {
  if (retrievers.empty() || objectives.empty() || seeds.empty())
    throw Error("crosspair needs retrievers, objectives and seeds");
  CrosspairResult result;
  result.retrievers.assign(retrievers.begin(), retrievers.end());
  result.objectives.assign(objectives.begin(), objectives.end());

  struct Job {
    Objective objective;
    RetrieverKind train_retriever;
    std::uint64_t seed;
    std::vector<EvalReport> per_test;  // indexed like `retrievers`
  };
  std::vector<Job> jobs;
  for (auto o : objectives)
    for (auto tr : retrievers)
      for (auto s : seeds) jobs.push_back({o, tr, s, {}});
  run_jobs(jobs.size(), config.threads, [&](std::size_t i) {
    auto& job = jobs[i];
    const CellSpec spec{job.objective, job.train_retriever, job.train_retriever, config.sampler.group_size, job.seed};
    const auto params = train_cell(b, config, spec);
    for (auto te : retrievers) job.per_test.push_back(evaluate_cell(b, config, params, te));
  });

  std::size_t j = 0;
  for (auto o : objectives)
    for (auto tr : retrievers) {
      std::vector<std::vector<EvalReport>> by_test(retrievers.size());
      for (std::size_t s = 0; s < seeds.size(); ++s, ++j)
        for (std::size_t t = 0; t < retrievers.size(); ++t) by_test[t].push_back(jobs[j].per_test[t]);
      for (std::size_t t = 0; t < retrievers.size(); ++t) {
        CrosspairCell cell{o, tr, retrievers[t], 0.0, 1.0, 0.0, pool_reports(by_test[t])};
        for (const auto& r : by_test[t]) cell.mrr += r.mrr;
        cell.mrr /= static_cast<double>(seeds.size());
        result.cells.push_back(std::move(cell));
      }
    }
  for (auto& c : result.cells) {
    if (c.train_retriever == c.test_retriever) continue;
    const auto& diag = result.at(c.objective, c.test_retriever, c.test_retriever);
    if (c.pooled.query_count() < 2) continue;
    const auto tt = paired_t_test(c.pooled, diag.pooled);
    c.t_vs_diagonal = tt.t;
    c.p_vs_diagonal = tt.p;
  }
  return result;
}

}  // namespace lce

#endif
