#ifndef LCE_RERANKER_HPP
#define LCE_RERANKER_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "lce/binary_io.hpp"
#include "lce/error.hpp"
#include "lce/inverted_index.hpp"
#include "lce/random.hpp"
#include "lce/retrieval.hpp"

namespace lce {

inline constexpr std::size_t kFeatureCount = 6;
inline constexpr std::size_t kDefaultHidden = 16;

/// Query-document features, in order:
///   0  BM25 (k1 = 0.9, b = 0.4)
///   1  fraction of distinct query terms present in the document
///   2  idf-weighted coverage of the distinct query terms
///   3  ln(1 + sum of query-term frequencies in the document)
///   4  ln((dl + 1) / (avgdl + 1))
///   5  Dirichlet query likelihood (mu = 2500)
using FeatureVector = std::array<double, kFeatureCount>;

inline constexpr double kFeatureBm25K1 = 0.9;
inline constexpr double kFeatureBm25B = 0.4;
inline constexpr double kFeatureQlMu = 2500.0;

/// Features from index statistics only; relevance judgments are never consulted.
inline FeatureVector extract_features(const InvertedIndex& index, std::span<const std::string> query_tokens,
                                      std::uint32_t ordinal) {
  FeatureVector f{};
  f[0] = bm25_score(index, query_tokens, ordinal, kFeatureBm25K1, kFeatureBm25B);

  std::vector<const std::string*> distinct;
  {
    std::unordered_set<std::string_view> seen;
    for (const auto& t : query_tokens)
      if (seen.insert(t).second) distinct.push_back(&t);
  }
  double present = 0, idf_all = 0, idf_matched = 0, tf_sum = 0;
  for (const auto* t : distinct) {
    const auto* e = index.find(*t);
    const double idf = bm25_idf(index.doc_count(), e ? e->document_frequency() : 0);
    idf_all += idf;
    const auto tf = e ? InvertedIndex::term_frequency(*e, ordinal) : 0u;
    if (tf > 0) {
      present += 1;
      idf_matched += idf;
      tf_sum += tf;
    }
  }
  f[1] = distinct.empty() ? 0.0 : present / static_cast<double>(distinct.size());
  f[2] = idf_all > 0 ? idf_matched / idf_all : 0.0;
  f[3] = std::log1p(tf_sum);
  f[4] = std::log((index.doc(ordinal).length + 1.0) / (index.avg_doc_length() + 1.0));
  f[5] = ql_dirichlet_score(index, query_tokens, ordinal, kFeatureQlMu);
  return f;
}

inline FeatureVector extract_features(const InvertedIndex& index, const Query& query, const std::string& doc_id) {
  const auto ordinal = index.ordinal_of(doc_id);
  if (!ordinal) throw Error("unknown doc_id: " + doc_id);
  const auto tokens = index.analyze_query(query.text);
  return extract_features(index, tokens, *ordinal);
}

// ---- parameters ---------------------------------------------------------

struct FeatureStats {
  FeatureVector mean{};
  FeatureVector stddev{1, 1, 1, 1, 1, 1};

  bool operator==(const FeatureStats&) const = default;
};

/// Per-feature mean and population standard deviation; a zero-variance
/// feature gets a standard deviation of 1.
inline FeatureStats compute_feature_stats(std::span<const FeatureVector> features) {
  FeatureStats s;
  if (features.empty()) return s;
  const double n = static_cast<double>(features.size());
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    double sum = 0;
    for (const auto& f : features) sum += f[i];
    const double mean = sum / n;
    double ss = 0;
    for (const auto& f : features) ss += (f[i] - mean) * (f[i] - mean);
    const double sd = std::sqrt(ss / n);
    s.mean[i] = mean;
    s.stddev[i] = (sd > 1e-12 && std::isfinite(sd)) ? sd : 1.0;
  }
  return s;
}

/// score = v_p . relu(W1 z + b1) + b2 with z the z-normalized features.
struct ScorerParams {
  std::size_t hidden = kDefaultHidden;
  std::vector<double> w1;  // hidden x kFeatureCount, row-major
  std::vector<double> b1;
  std::vector<double> v_p;
  double b2 = 0.0;
  FeatureStats stats;

  static ScorerParams zeros(std::size_t hidden = kDefaultHidden) {
    ScorerParams p;
    p.hidden = hidden;
    p.w1.assign(hidden * kFeatureCount, 0.0);
    p.b1.assign(hidden, 0.0);
    p.v_p.assign(hidden, 0.0);
    return p;
  }

  bool operator==(const ScorerParams&) const = default;
};

struct ScorerGradients {
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> v_p;
  double b2 = 0.0;

  static ScorerGradients zeros_like(const ScorerParams& p) {
    return {std::vector<double>(p.w1.size(), 0.0), std::vector<double>(p.b1.size(), 0.0),
            std::vector<double>(p.v_p.size(), 0.0), 0.0};
  }

  bool operator==(const ScorerGradients&) const = default;
};

/// Visits trainable parameters alongside matching gradient entries in a fixed order.
template <typename Params, typename Grads, typename Fn>
void for_each_trainable(Params& p, Grads& g, Fn&& fn) {
  for (std::size_t i = 0; i < p.w1.size(); ++i) fn(p.w1[i], g.w1[i]);
  for (std::size_t i = 0; i < p.b1.size(); ++i) fn(p.b1[i], g.b1[i]);
  for (std::size_t i = 0; i < p.v_p.size(); ++i) fn(p.v_p[i], g.v_p[i]);
  fn(p.b2, g.b2);
}

inline std::size_t trainable_count(const ScorerParams& p) { return p.w1.size() + p.b1.size() + p.v_p.size() + 1; }

namespace detail {

inline void check_shapes(const ScorerParams& p) {
  if (p.hidden == 0 || p.w1.size() != p.hidden * kFeatureCount || p.b1.size() != p.hidden || p.v_p.size() != p.hidden)
    throw Error("scorer parameter shapes do not match hidden size");
}

inline FeatureVector normalize(const ScorerParams& p, const FeatureVector& f) {
  FeatureVector z;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!std::isfinite(f[i])) throw Error("non-finite feature at position " + std::to_string(i));
    z[i] = (f[i] - p.stats.mean[i]) / p.stats.stddev[i];
  }
  return z;
}

inline double pre_activation(const ScorerParams& p, const FeatureVector& z, std::size_t j) {
  double a = p.b1[j];
  const double* row = p.w1.data() + j * kFeatureCount;
  for (std::size_t i = 0; i < kFeatureCount; ++i) a += row[i] * z[i];
  return a;
}

}  // namespace detail

inline double score(const ScorerParams& p, const FeatureVector& features) {
  detail::check_shapes(p);
  const auto z = detail::normalize(p, features);
  double s = p.b2;
  for (std::size_t j = 0; j < p.hidden; ++j) {
    const double a = detail::pre_activation(p, z, j);
    if (a > 0) s += p.v_p[j] * a;
  }
  return s;
}

/// Adds d(upstream * score)/d(theta) into `grads`. The relu subgradient at 0 is 0.
inline void accumulate_backward(const ScorerParams& p, const FeatureVector& features, double upstream,
                                ScorerGradients& grads) {
  detail::check_shapes(p);
  const auto z = detail::normalize(p, features);
  grads.b2 += upstream;
  for (std::size_t j = 0; j < p.hidden; ++j) {
    const double a = detail::pre_activation(p, z, j);
    if (!(a > 0)) continue;
    grads.v_p[j] += upstream * a;
    const double da = upstream * p.v_p[j];
    grads.b1[j] += da;
    double* row = grads.w1.data() + j * kFeatureCount;
    for (std::size_t i = 0; i < kFeatureCount; ++i) row[i] += da * z[i];
  }
}

inline ScorerGradients score_backward(const ScorerParams& p, const FeatureVector& features, double upstream) {
  auto g = ScorerGradients::zeros_like(p);
  accumulate_backward(p, features, upstream, g);
  return g;
}

/// W1 ~ U[-1/sqrt(F), 1/sqrt(F)], v_p ~ U[-1/sqrt(H), 1/sqrt(H)], biases zero.
inline ScorerParams init_params(std::uint64_t seed, std::size_t hidden, std::size_t features,
                                const FeatureStats& stats) {
  if (features != kFeatureCount)
    throw Error("feature count " + std::to_string(features) + " unsupported; expected " +
                std::to_string(kFeatureCount));
  if (hidden == 0) throw Error("hidden size must be positive");
  auto p = ScorerParams::zeros(hidden);
  p.stats = stats;
  Rng rng(seed);
  const double wb = 1.0 / std::sqrt(static_cast<double>(features));
  const double vb = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (auto& w : p.w1) w = uniform_real(rng, -wb, wb);
  for (auto& v : p.v_p) v = uniform_real(rng, -vb, vb);
  return p;
}

// ---- persistence ----------------------------------------------------------

inline constexpr std::string_view kModelMagic = "LCEMODL\x01";
inline constexpr std::uint32_t kModelVersion = 1;

inline void save_model(const ScorerParams& p, const std::string& path) {
  detail::check_shapes(p);
  binary::Writer w;
  w.header(kModelMagic, kModelVersion);
  w.u64(p.hidden);
  w.u64(kFeatureCount);
  for (auto v : p.stats.mean) w.f64(v);
  for (auto v : p.stats.stddev) w.f64(v);
  for (auto v : p.w1) w.f64(v);
  for (auto v : p.b1) w.f64(v);
  for (auto v : p.v_p) w.f64(v);
  w.f64(p.b2);
  w.save(path);
}

inline ScorerParams load_model(const std::string& path) {
  auto r = binary::Reader::open(path);
  r.header(kModelMagic, kModelVersion);
  const auto hidden = r.u64();
  const auto features = r.u64();
  if (features != kFeatureCount) throw Error("model feature count mismatch in " + path);
  if (hidden == 0 || hidden > (1u << 20)) throw Error("implausible hidden size in " + path);
  auto p = ScorerParams::zeros(hidden);
  for (auto& v : p.stats.mean) v = r.f64();
  for (auto& v : p.stats.stddev) v = r.f64();
  for (auto& v : p.w1) v = r.f64();
  for (auto& v : p.b1) v = r.f64();
  for (auto& v : p.v_p) v = r.f64();
  p.b2 = r.f64();
  r.expect_end();
  for (auto sd : p.stats.stddev)
    if (!(sd > 0)) throw Error("non-positive feature standard deviation in " + path);
  return p;
}

}  // namespace lce

#endif
