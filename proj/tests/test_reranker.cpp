#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lce/reranker.hpp"
#include "oracles.hpp"
#include "tmpdir.hpp"

using namespace lce;

TEST(Features, HandValues) {
  std::vector<Document> docs{{"d1", "", "", "x x y y"}, {"d2", "", "", "y z"}};
  const auto idx = build_index(docs);
  const auto f = extract_features(idx, Query{"q", "x w x"}, "d1");
  const double idf_x = std::log(2.0), idf_w = std::log(1.0 + 2.5 / 0.5);
  EXPECT_NEAR(f[0], 2 * idf_x * 3.8 / 3.02, 1e-12);
  EXPECT_NEAR(f[1], 0.5, 1e-15);
  EXPECT_NEAR(f[2], idf_x / (idf_x + idf_w), 1e-12);
  EXPECT_NEAR(f[3], std::log(3.0), 1e-12);
  EXPECT_NEAR(f[4], std::log(5.0 / 4.0), 1e-12);
  EXPECT_NEAR(f[5], 2 * std::log((2.0 + 2500.0 / 3.0) / 2504.0), 1e-12);
  EXPECT_THROW(extract_features(idx, Query{"q", "x"}, "nope"), Error);
}

TEST(Features, NoQueryTermsGivesZeros) {
  std::vector<Document> docs{{"d1", "", "", "a b"}, {"d2", "", "", "c"}};
  const auto idx = build_index(docs);
  const auto f = extract_features(idx, Query{"q", "zzz"}, "d1");
  EXPECT_EQ(f[0], 0.0);
  EXPECT_EQ(f[1], 0.0);
  EXPECT_EQ(f[3], 0.0);
  EXPECT_EQ(f[5], 0.0);
}

TEST(FeatureStats, MeanAndZeroVarianceFallback) {
  std::vector<FeatureVector> fs{{1, 5, 0, 0, 0, 0}, {3, 5, 0, 0, 0, 0}};
  const auto s = compute_feature_stats(fs);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(s.stddev[0], 1.0);
  EXPECT_DOUBLE_EQ(s.mean[1], 5.0);
  EXPECT_DOUBLE_EQ(s.stddev[1], 1.0);
}

TEST(Scorer, ForwardByHand) {
  auto p = ScorerParams::zeros(2);
  p.b2 = 0.5;
  p.w1[0] = 1.0;        // unit 0 reads feature 0
  p.w1[6 + 1] = -1.0;   // unit 1 reads -feature 1
  p.v_p = {2.0, 3.0};
  EXPECT_DOUBLE_EQ(score(p, {1.5, 2.0, 0, 0, 0, 0}), 0.5 + 2.0 * 1.5);
  EXPECT_DOUBLE_EQ(score(p, {-1.0, -2.0, 0, 0, 0, 0}), 0.5 + 3.0 * 2.0);
  FeatureVector bad{std::nan(""), 0, 0, 0, 0, 0};
  EXPECT_THROW(score(p, bad), Error);
  p.v_p.pop_back();
  EXPECT_THROW(score(p, {}), Error);
}

TEST(Scorer, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  int checked = 0;
  while (checked < 20) {
    auto p = oracle::random_params(rng, 5);
    const auto f = oracle::random_features(rng);
    if (!oracle::clear_of_kinks(p, {f}, 1e-3)) continue;
    const double upstream = 0.7;
    const auto g = oracle::flatten(score_backward(p, f, upstream));
    auto ptrs = oracle::trainables(p);
    for (std::size_t k = 0; k < ptrs.size(); ++k) {
      const double num = oracle::central_difference([&] { return upstream * score(p, f); }, *ptrs[k]);
      EXPECT_LT(oracle::relative_error(g[k], num), 1e-4) << "param " << k;
    }
    ++checked;
  }
}

TEST(Scorer, InitIsSeededAndBounded) {
  const auto a = init_params(4, 16, kFeatureCount, {});
  EXPECT_EQ(a, init_params(4, 16, kFeatureCount, {}));
  EXPECT_NE(a, init_params(5, 16, kFeatureCount, {}));
  for (double w : a.w1) EXPECT_LE(std::fabs(w), 1.0 / std::sqrt(6.0));
  for (double v : a.v_p) EXPECT_LE(std::fabs(v), 0.25);
  for (double b : a.b1) EXPECT_EQ(b, 0.0);
  EXPECT_EQ(a.b2, 0.0);
  EXPECT_THROW(init_params(1, 16, 5, {}), Error);
  EXPECT_THROW(init_params(1, 0, kFeatureCount, {}), Error);
}

TEST(Scorer, SaveLoadRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(1);
  const auto p = oracle::random_params(rng, 7);
  save_model(p, dir.file("m"));
  EXPECT_EQ(load_model(dir.file("m")), p);
  auto bytes = slurp(dir.file("m"));
  spit(dir.file("trunc"), bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_model(dir.file("trunc")), Error);
  spit(dir.file("long"), bytes + "x");
  EXPECT_THROW(load_model(dir.file("long")), Error);
}
