// Independent reference implementations used by the unit and acceptance tests.
#ifndef LCE_TESTS_ORACLES_HPP
#define LCE_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "lce/lce.hpp"

namespace oracle {

// ---- retrieval by direct scan ---------------------------------------------

struct Scan {
  std::vector<std::string> ids;
  std::vector<std::map<std::string, int>> tf;
  std::vector<double> length;
  std::map<std::string, int> df;
  std::map<std::string, long> cf;
  double total = 0;
};

inline Scan scan(const std::vector<lce::Document>& corpus) {
  Scan s;
  for (const auto& d : corpus) {
    std::map<std::string, int> tf;
    std::size_t n = 0;
    // Lowercased alphanumeric runs; bytes >= 0x80 count as word characters.
    std::string cur;
    auto flush = [&] {
      if (!cur.empty()) ++tf[cur], ++n;
      cur.clear();
    };
    for (unsigned char c : lce::document_text(d)) {
      if (std::isalnum(c) || c >= 0x80)
        cur += static_cast<char>(std::tolower(c));
      else
        flush();
    }
    flush();
    for (const auto& [t, c] : tf) ++s.df[t], s.cf[t] += c;
    s.ids.push_back(d.doc_id);
    s.tf.push_back(std::move(tf));
    s.length.push_back(static_cast<double>(n));
    s.total += static_cast<double>(n);
  }
  return s;
}

inline std::vector<std::string> query_terms(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text + " ") {
    if (std::isalnum(c) || c >= 0x80) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  return out;
}

/// Scores every document from raw counts and ranks by (score desc, doc_id asc).
inline std::vector<std::pair<std::string, double>> brute_force(const Scan& s, const lce::Query& q,
                                                               const lce::RetrieverConfig& c,
                                                               const lce::QrelSet* qrels = nullptr) {
  const auto terms = query_terms(q.text);
  const double n = static_cast<double>(s.ids.size());
  const double avgdl = s.total / n;
  std::vector<std::pair<std::string, double>> all;
  for (std::size_t d = 0; d < s.ids.size(); ++d) {
    double score = 0;
    bool any = false;
    for (const auto& t : terms) {
      auto df = s.df.find(t);
      if (df == s.df.end()) continue;
      auto it = s.tf[d].find(t);
      const double tf = it == s.tf[d].end() ? 0.0 : it->second;
      if (c.kind == lce::RetrieverKind::ql_dirichlet) {
        const double p = static_cast<double>(s.cf.at(t)) / s.total;
        score += std::log((tf + c.ql_mu * p) / (s.length[d] + c.ql_mu));
      } else if (tf > 0) {
        any = true;
        const double idf = std::log(1.0 + (n - df->second + 0.5) / (df->second + 0.5));
        score += idf * tf * (c.bm25_k1 + 1.0) / (tf + c.bm25_k1 * (1.0 - c.bm25_b + c.bm25_b * s.length[d] / avgdl));
      }
    }
    if (c.kind == lce::RetrieverKind::ql_dirichlet) {
      all.emplace_back(s.ids[d], score);
    } else if (any) {
      if (c.kind == lce::RetrieverKind::oracle_mix) score += c.oracle_alpha * qrels->grade(q.query_id, s.ids[d]);
      all.emplace_back(s.ids[d], score);
    }
  }
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second > y.second : x.first < y.first;
  });
  if (all.size() > c.top_k) all.resize(c.top_k);
  return all;
}

// ---- MRR by direct scan ---------------------------------------------------

inline double mrr(const std::vector<lce::Ranking>& run, const lce::QrelSet& qrels, std::size_t k) {
  double sum = 0;
  int counted = 0;
  for (const auto& [qid, docs] : qrels.judgments()) {
    bool has = false;
    for (const auto& [d, g] : docs) has = has || g > 0;
    if (!has) continue;
    ++counted;
    for (const auto& r : run) {
      if (r.query_id != qid) continue;
      for (std::size_t i = 0; i < r.docs.size() && i < k; ++i) {
        auto it = docs.find(r.docs[i].doc_id);
        if (it != docs.end() && it->second > 0) {
          sum += 1.0 / static_cast<double>(i + 1);
          break;
        }
      }
    }
  }
  return counted ? sum / counted : 0.0;
}

// ---- paired t-test via Boost.Math -----------------------------------------

struct TTest {
  double t, p;
};

inline TTest paired_t(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  double mean = 0;
  for (double x : d) mean += x;
  mean /= n;
  double var = 0;
  for (double x : d) var += (x - mean) * (x - mean);
  var /= n - 1;
  const double t = mean / std::sqrt(var / n);
  boost::math::students_t dist(n - 1);
  return {t, 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)))};
}

// ---- finite differences ---------------------------------------------------

inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-5) {
  const double x0 = x;
  x = x0 + h;
  const double up = f();
  x = x0 - h;
  const double down = f();
  x = x0;
  return (up - down) / (2 * h);
}

/// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero entries from
/// turning rounding noise into large relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  return std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), floor});
}

// ---- random fixtures ------------------------------------------------------

inline std::vector<lce::Document> random_corpus(std::mt19937_64& rng, std::size_t docs, std::size_t vocab,
                                                std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(1, max_len), word(0, vocab - 1);
  std::vector<lce::Document> out;
  for (std::size_t i = 0; i < docs; ++i) {
    std::string body;
    const auto n = len(rng);
    for (std::size_t j = 0; j < n; ++j) body += (j ? " w" : "w") + std::to_string(word(rng));
    out.push_back({"d" + std::to_string(10000 + i), "", "", body});
  }
  return out;
}

inline std::vector<lce::Query> random_queries(std::mt19937_64& rng, std::size_t n, std::size_t vocab) {
  std::uniform_int_distribution<std::size_t> len(1, 4), word(0, vocab + 5);
  std::vector<lce::Query> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    const auto k = len(rng);
    for (std::size_t j = 0; j < k; ++j) text += (j ? " W" : "W") + std::to_string(word(rng));
    out.push_back({"q" + std::to_string(i), text});
  }
  return out;
}

inline lce::FeatureVector random_features(std::mt19937_64& rng) {
  std::normal_distribution<double> z(0, 1.5);
  lce::FeatureVector f;
  for (auto& x : f) x = z(rng);
  return f;
}

/// Random scorer whose hidden pre-activations stay clear of the relu kink for
/// the given features, so finite differences see a smooth function.
inline bool clear_of_kinks(const lce::ScorerParams& p, const std::vector<lce::FeatureVector>& feats, double margin) {
  for (const auto& f : feats) {
    for (std::size_t j = 0; j < p.hidden; ++j) {
      double a = p.b1[j];
      for (std::size_t i = 0; i < lce::kFeatureCount; ++i)
        a += p.w1[j * lce::kFeatureCount + i] * (f[i] - p.stats.mean[i]) / p.stats.stddev[i];
      if (std::fabs(a) < margin) return false;
    }
  }
  return true;
}

inline lce::ScorerParams random_params(std::mt19937_64& rng, std::size_t hidden) {
  std::normal_distribution<double> z(0, 0.7);
  std::uniform_real_distribution<double> sd(0.5, 2.0);
  auto p = lce::ScorerParams::zeros(hidden);
  for (auto& w : p.w1) w = z(rng);
  for (auto& b : p.b1) b = z(rng);
  for (auto& v : p.v_p) v = z(rng);
  p.b2 = z(rng);
  for (std::size_t i = 0; i < lce::kFeatureCount; ++i) {
    p.stats.mean[i] = z(rng);
    p.stats.stddev[i] = sd(rng);
  }
  return p;
}

/// Visits every trainable parameter with a name-free index.
inline std::vector<double*> trainables(lce::ScorerParams& p) {
  std::vector<double*> out;
  for (auto& w : p.w1) out.push_back(&w);
  for (auto& b : p.b1) out.push_back(&b);
  for (auto& v : p.v_p) out.push_back(&v);
  out.push_back(&p.b2);
  return out;
}

inline std::vector<double> flatten(const lce::ScorerGradients& g) {
  std::vector<double> out(g.w1);
  out.insert(out.end(), g.b1.begin(), g.b1.end());
  out.insert(out.end(), g.v_p.begin(), g.v_p.end());
  out.push_back(g.b2);
  return out;
}

}  // namespace oracle

#endif
