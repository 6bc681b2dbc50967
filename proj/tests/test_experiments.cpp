#include <gtest/gtest.h>

#include <atomic>
#include <stdexcept>

#include "lce/experiments.hpp"

using namespace lce;

namespace {

PipelineConfig small_pipeline() {
  PipelineConfig c;
  c.synth.n_queries = 90;
  c.synth.n_dev_queries = 30;
  c.synth.n_docs = 25000;
  c.train.epochs = 2;
  return c;
}

const Benchmark& shared_benchmark() {
  static const Benchmark b = [] {
    const std::vector<RetrieverKind> kinds{RetrieverKind::bm25_tuned, RetrieverKind::ql_dirichlet};
    return prepare_benchmark(small_pipeline(), kinds);
  }();
  return b;
}

}  // namespace

TEST(Fnv, KnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Manifest, DescribeCoversKnobs) {
  const auto d = describe(PipelineConfig{});
  std::map<std::string, std::string> m(d.begin(), d.end());
  EXPECT_EQ(m.at("synth.confounder_strength"), "0.80000000000000004");
  EXPECT_EQ(m.at("sampler.group_size"), "8");
  EXPECT_EQ(m.at("train.epochs"), std::to_string(kBenchmarkEpochs));
  EXPECT_EQ(m.at("test_retriever"), "bm25_tuned");
  EXPECT_EQ(format_manifest({{"a", "1"}, {"b", "x"}}), "a=1\nb=x\n");
}

TEST(RunJobs, CoversAllIndicesAndRethrows) {
  std::vector<int> hit(100, 0);
  run_jobs(hit.size(), 7, [&](std::size_t i) { hit[i] += 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(run_jobs(10, 3, [](std::size_t i) {
                 if (i == 4) throw Error("boom");
               }),
               Error);
}

TEST(Benchmark, DevRunsUseDevQueries) {
  const auto& b = shared_benchmark();
  EXPECT_EQ(b.dev_run(RetrieverKind::bm25_tuned).size(), b.data.dev_queries.size());
  EXPECT_EQ(b.train_run(RetrieverKind::ql_dirichlet).size(), b.data.train_queries.size());
  EXPECT_THROW(b.dev_run(RetrieverKind::oracle_mix), Error);
  EXPECT_EQ(b.dev_qrels.judgments().size(), b.data.dev_queries.size());
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  const auto& b = shared_benchmark();
  auto c = small_pipeline();
  const std::vector<std::size_t> sizes{2, 4};
  const std::vector<std::uint64_t> seeds{1, 2};
  c.threads = 1;
  const auto one = group_size_sweep(b, c, sizes, seeds);
  c.threads = 4;
  const auto four = group_size_sweep(b, c, sizes, seeds);
  EXPECT_EQ(one.to_csv(), four.to_csv());
  ASSERT_EQ(one.rows.size(), 4u);
  EXPECT_EQ(one.rows[1].group_size, 2u);
  EXPECT_EQ(one.rows[1].seed, 2u);
  EXPECT_EQ(one.mrr(4, 1), one.rows[2].mrr);
  EXPECT_THROW(one.summary(8), Error);
  const std::vector<std::size_t> bad{1};
  EXPECT_THROW(group_size_sweep(b, c, bad, seeds), Error);
}

TEST(Sweep, CellMatchesDirectPipeline) {
  const auto& b = shared_benchmark();
  const auto c = small_pipeline();
  const std::vector<std::size_t> sizes{4};
  const std::vector<std::uint64_t> seeds{3};
  const auto sweep = group_size_sweep(b, c, sizes, seeds);
  TrainConfig tc = c.train;
  tc.seed = 3;
  SamplerConfig sc;
  sc.group_size = 4;
  sc.seed = 3;
  const auto model = train(b.index, b.train_run(RetrieverKind::bm25_tuned), b.data.qrels, b.data.train_queries, tc, sc);
  const auto reranked = rerank_all(model.params, b.index, b.data.dev_queries, b.dev_run(RetrieverKind::bm25_tuned), 100);
  EXPECT_DOUBLE_EQ(sweep.rows[0].mrr, mrr_at_k(reranked, b.data.dev_qrels(), 100).mrr);
}

TEST(Crosspair, DiagonalAndLayout) {
  const auto& b = shared_benchmark();
  auto c = small_pipeline();
  c.threads = 4;
  const std::vector<RetrieverKind> rs{RetrieverKind::ql_dirichlet, RetrieverKind::bm25_tuned};
  const std::vector<Objective> os{Objective::vanilla, Objective::lce};
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto r = crosspair_experiment(b, c, rs, os, seeds);
  ASSERT_EQ(r.cells.size(), 8u);
  for (const auto& cell : r.cells) {
    EXPECT_EQ(cell.pooled.query_count(), 2 * b.data.dev_queries.size());
    if (cell.train_retriever == cell.test_retriever) {
      EXPECT_EQ(cell.p_vs_diagonal, 1.0);
    }
    EXPECT_GE(cell.p_vs_diagonal, 0.0);
    EXPECT_LE(cell.p_vs_diagonal, 1.0);
  }
  // A cell's mean over seeds matches the single-seed sweep for the same spec.
  c.train_retriever = c.test_retriever = RetrieverKind::bm25_tuned;
  const std::vector<std::size_t> g{8};
  const auto sweep = group_size_sweep(b, c, g, seeds);
  EXPECT_NEAR(r.at(Objective::lce, RetrieverKind::bm25_tuned, RetrieverKind::bm25_tuned).mrr,
              (sweep.mrr(8, 1) + sweep.mrr(8, 2)) / 2, 1e-12);
  EXPECT_EQ(r.to_csv().substr(0, r.to_csv().find('\n')), "objective,train_retriever,test_retriever,mrr,p_vs_diagonal");
}
