#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lce/retrieval.hpp"
#include "oracles.hpp"

using namespace lce;

namespace {

std::vector<Document> hand_corpus() { return {{"d1", "", "", "x x y y"}, {"d2", "", "", "y z"}}; }

}  // namespace

TEST(Bm25, HandValue) {
  const auto idx = build_index(hand_corpus());
  // N = 2, df(x) = 1, tf = 2, dl = 4, avgdl = 3.
  const double expected = std::log(2.0) * 3.8 / 3.02;
  const std::vector<std::string> q{"x"};
  EXPECT_NEAR(bm25_score(idx, q, 0, 0.9, 0.4), expected, 1e-12);
  EXPECT_EQ(bm25_score(idx, q, 1, 0.9, 0.4), 0.0);
  const auto r = retrieve(idx, {"q", "x"}, RetrieverConfig::defaults(RetrieverKind::bm25));
  ASSERT_EQ(r.docs.size(), 1u);
  EXPECT_EQ(r.docs[0].doc_id, "d1");
  EXPECT_NEAR(r.docs[0].score, expected, 1e-12);
}

TEST(Bm25, IdfNonNegativeForCommonTerms) {
  EXPECT_NEAR(bm25_idf(10, 10), std::log(1.0 + 0.5 / 10.5), 1e-15);
  EXPECT_GT(bm25_idf(10, 10), 0.0);
}

TEST(QueryLikelihood, HandValue) {
  const auto idx = build_index(hand_corpus());
  const std::vector<std::string> q{"x"};
  const double expected = std::log((2.0 + 2500.0 / 3.0) / (4.0 + 2500.0));
  EXPECT_NEAR(ql_dirichlet_score(idx, q, 0, 2500.0), expected, 1e-12);
  // Every document is scored, including those without the term.
  const auto r = retrieve(idx, {"q", "x unseen"}, RetrieverConfig::defaults(RetrieverKind::ql_dirichlet));
  ASSERT_EQ(r.docs.size(), 2u);
  EXPECT_NEAR(r.docs[1].score, std::log((2500.0 / 3.0) / (2.0 + 2500.0)), 1e-12);
}

TEST(Retrieve, TiesBreakByDocId) {
  std::vector<Document> docs{{"c", "", "", "t"}, {"a", "", "", "t"}, {"b", "", "", "t"}};
  const auto r = retrieve(build_index(docs), {"q", "t"}, RetrieverConfig::defaults(RetrieverKind::bm25));
  ASSERT_EQ(r.docs.size(), 3u);
  EXPECT_EQ(r.docs[0].doc_id, "a");
  EXPECT_EQ(r.docs[1].doc_id, "b");
  EXPECT_EQ(r.docs[2].doc_id, "c");
}

TEST(Retrieve, TopKTruncatesAndUnknownTermsGiveNothing) {
  std::mt19937_64 rng(2);
  const auto idx = build_index(oracle::random_corpus(rng, 200, 10, 10));
  auto c = RetrieverConfig::defaults(RetrieverKind::bm25);
  c.top_k = 7;
  EXPECT_EQ(retrieve(idx, {"q", "w1 w2"}, c).docs.size(), 7u);
  EXPECT_TRUE(retrieve(idx, {"q", "nothing here"}, c).docs.empty());
}

TEST(Retrieve, OracleMixNeedsQrelsAndLiftsRelevant) {
  const auto idx = build_index(hand_corpus());
  auto c = RetrieverConfig::defaults(RetrieverKind::oracle_mix);
  EXPECT_THROW(retrieve(idx, {"q", "y"}, c), Error);
  QrelSet qrels;
  qrels.add("q", "d2", 1);
  c.oracle_alpha = 5.0;
  const auto r = retrieve(idx, {"q", "y"}, c, &qrels);
  ASSERT_EQ(r.docs.size(), 2u);
  EXPECT_EQ(r.docs[0].doc_id, "d2");
  const std::vector<std::string> q{"y"};
  EXPECT_NEAR(r.docs[0].score, bm25_score(idx, q, 1, 3.8, 0.9) + 5.0, 1e-12);
}

TEST(Retrieve, DefaultsPerKind) {
  EXPECT_EQ(RetrieverConfig::defaults(RetrieverKind::bm25).bm25_k1, 0.9);
  EXPECT_EQ(RetrieverConfig::defaults(RetrieverKind::bm25).bm25_b, 0.4);
  EXPECT_EQ(RetrieverConfig::defaults(RetrieverKind::bm25_tuned).bm25_k1, 3.8);
  EXPECT_EQ(RetrieverConfig::defaults(RetrieverKind::bm25_tuned).bm25_b, 0.9);
  EXPECT_EQ(RetrieverConfig::defaults(RetrieverKind::ql_dirichlet).ql_mu, 2500.0);
  EXPECT_EQ(parse_retriever_kind("oracle_mix"), RetrieverKind::oracle_mix);
  EXPECT_THROW(parse_retriever_kind("dense"), Error);
}

TEST(Retrieve, ConfigValidation) {
  const auto idx = build_index(hand_corpus());
  RetrieverConfig c;
  c.bm25_b = 1.5;
  EXPECT_THROW(retrieve(idx, {"q", "x"}, c), Error);
  c = {};
  c.top_k = 0;
  EXPECT_THROW(retrieve(idx, {"q", "x"}, c), Error);
  c = {};
  c.ql_mu = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Retrieve, MatchesBruteForce) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 4; ++trial) {
    const auto corpus = oracle::random_corpus(rng, 150, 25, 25);
    const auto queries = oracle::random_queries(rng, 10, 25);
    const auto idx = build_index(corpus);
    const auto s = oracle::scan(corpus);
    QrelSet qrels;
    for (const auto& q : queries) qrels.add(q.query_id, corpus[trial * 7].doc_id, 1 + trial % 2);
    for (auto kind : {RetrieverKind::bm25, RetrieverKind::bm25_tuned, RetrieverKind::ql_dirichlet,
                      RetrieverKind::oracle_mix}) {
      auto c = RetrieverConfig::defaults(kind);
      c.top_k = 40;
      for (const auto& q : queries) {
        const auto got = retrieve(idx, q, c, &qrels);
        const auto want = oracle::brute_force(s, q, c, &qrels);
        ASSERT_EQ(got.docs.size(), want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
          EXPECT_EQ(got.docs[i].doc_id, want[i].first);
          EXPECT_NEAR(got.docs[i].score, want[i].second, 1e-9);
        }
      }
    }
  }
}

TEST(Retrieve, ThreadsDoNotChangeRuns) {
  std::mt19937_64 rng(3);
  const auto corpus = oracle::random_corpus(rng, 400, 50, 20);
  const auto queries = oracle::random_queries(rng, 37, 50);
  const auto idx = build_index(corpus);
  for (auto kind : {RetrieverKind::bm25, RetrieverKind::ql_dirichlet}) {
    const auto c = RetrieverConfig::defaults(kind);
    const auto one = retrieve_all(idx, queries, c, nullptr, 1);
    EXPECT_EQ(retrieve_all(idx, queries, c, nullptr, 4), one);
    EXPECT_EQ(retrieve_all(idx, queries, c, nullptr, 64), one);
  }
}
