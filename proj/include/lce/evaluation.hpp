#ifndef LCE_EVALUATION_HPP
#define LCE_EVALUATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "lce/corpus_io.hpp"
#include "lce/error.hpp"
#include "lce/inverted_index.hpp"
#include "lce/reranker.hpp"

namespace lce {

// ---- reranking --------------------------------------------------------------

/// Rescores the top `depth` candidates with the scorer and reorders them
/// (score desc, doc_id asc). Candidates beyond depth are dropped.
inline Ranking rerank(const ScorerParams& params, const InvertedIndex& index, const Query& query,
                      const Ranking& candidates, std::size_t depth, const std::string& model_tag = "rerank") {
  const auto tokens = index.analyze_query(query.text);
  const auto keep = std::min(depth, candidates.docs.size());
  Ranking out{candidates.query_id, {}, model_tag + "@" + candidates.tag};
  out.docs.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto& doc_id = candidates.docs[i].doc_id;
    const auto ord = index.ordinal_of(doc_id);
    if (!ord) throw Error("candidate " + doc_id + " for query " + candidates.query_id + " missing from index");
    out.docs.push_back({doc_id, score(params, extract_features(index, tokens, *ord))});
  }
  sort_ranked(out.docs);
  return out;
}

/// Reranks every candidate list; candidates whose query is unknown are an error.
inline std::vector<Ranking> rerank_all(const ScorerParams& params, const InvertedIndex& index,
                                       std::span<const Query> queries, std::span<const Ranking> candidates,
                                       std::size_t depth, const std::string& model_tag = "rerank",
                                       unsigned threads = 1) {
  std::unordered_map<std::string, const Query*> by_id;
  for (const auto& q : queries) by_id.emplace(q.query_id, &q);
  for (const auto& c : candidates)
    if (!by_id.contains(c.query_id)) throw Error("candidates for unknown query " + c.query_id);

  std::vector<Ranking> out(candidates.size());
  auto work = [&](std::size_t i) { out[i] = rerank(params, index, *by_id.at(candidates[i].query_id), candidates[i], depth, model_tag); };
  const auto workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(candidates.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < candidates.size(); ++i) work(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < candidates.size(); i += workers) work(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---- MRR --------------------------------------------------------------------

struct EvalReport {
  std::map<std::string, double> reciprocal_ranks;
  double mrr = 0.0;
  std::size_t k = 100;
  std::string tag;
  std::size_t excluded_queries = 0;  // ranked but without any relevant judgment

  std::size_t query_count() const { return reciprocal_ranks.size(); }

  std::string to_csv() const {
    std::string out = "query_id,reciprocal_rank\n";
    char buf[64];
    for (const auto& [q, rr] : reciprocal_ranks) {
      std::snprintf(buf, sizeof buf, "%.17g", rr);
      out += q + "," + buf + "\n";
    }
    std::snprintf(buf, sizeof buf, "%.17g", mrr);
    out += std::string("AGGREGATE,") + buf + "\n";
    return out;
  }
};

/// Mean reciprocal rank of the first relevant document within the top k.
/// Every query with at least one relevant judgment is counted; queries the
/// run does not cover score 0.
inline EvalReport mrr_at_k(std::span<const Ranking> run, const QrelSet& qrels, std::size_t k = 100,
                           std::string tag = "") {
  EvalReport report;
  report.k = k;
  report.tag = std::move(tag);
  std::unordered_map<std::string, const Ranking*> by_query;
  for (const auto& r : run) by_query.emplace(r.query_id, &r);
  for (const auto& [qid, judged] : qrels.judgments()) {
    if (!qrels.has_relevant(qid)) continue;
    double rr = 0.0;
    if (auto it = by_query.find(qid); it != by_query.end()) {
      const auto& docs = it->second->docs;
      const auto depth = std::min(k, docs.size());
      for (std::size_t i = 0; i < depth; ++i)
        if (qrels.relevant(qid, docs[i].doc_id)) {
          rr = 1.0 / static_cast<double>(i + 1);
          break;
        }
    }
    report.reciprocal_ranks.emplace(qid, rr);
  }
  for (const auto& r : run)
    if (!qrels.has_relevant(r.query_id)) ++report.excluded_queries;
  double sum = 0.0;
  for (const auto& [q, rr] : report.reciprocal_ranks) sum += rr;
  report.mrr = report.reciprocal_ranks.empty() ? 0.0 : sum / static_cast<double>(report.reciprocal_ranks.size());
  return report;
}

inline void write_report(const EvalReport& report, const std::string& path) {
  detail::write_text(path, report.to_csv());
}

inline EvalReport parse_report(std::string_view text, const std::string& origin = "<report>") {
  EvalReport report;
  bool aggregate = false;
  for (const auto& line : detail::content_lines(text)) {
    if (line.number == 1 && line.text == "query_id,reciprocal_rank") continue;
    const auto comma = line.text.rfind(',');
    double v = 0;
    if (comma == std::string_view::npos || !detail::parse_double(line.text.substr(comma + 1), v))
      throw Error(detail::where(origin, line.number) + ": malformed report line");
    const std::string key(line.text.substr(0, comma));
    if (key == "AGGREGATE") {
      report.mrr = v;
      aggregate = true;
    } else if (!report.reciprocal_ranks.emplace(key, v).second) {
      throw Error(detail::where(origin, line.number) + ": duplicate query " + key);
    }
  }
  if (!aggregate) throw Error(origin + ": missing AGGREGATE row");
  return report;
}

inline EvalReport read_report(const std::string& path) { return parse_report(detail::read_file(path), path); }

// ---- paired t-test ------------------------------------------------------

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and x in [0, 1].
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0 && b > 0)) throw Error("incomplete beta requires positive shape parameters");
  if (!(x >= 0 && x <= 1)) throw Error("incomplete beta requires x in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - std::exp(log_front) * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-tailed p-value of a Student t statistic with `dof` degrees of freedom.
inline double student_t_two_tailed_p(double t, double dof) {
  if (std::isnan(t)) throw Error("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

/// Paired t-test on per-query differences a - b. All-zero differences give
/// t = 0, p = 1; constant non-zero differences give t = +-inf, p = 0.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("paired t-test needs equally sized samples");
  const auto n = a.size();
  if (n < 2) throw Error("paired t-test needs at least two pairs");
  const double nd = static_cast<double>(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= nd;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / (nd - 1.0));
  TTestResult r;
  r.n = n;
  if (sd == 0.0) {
    if (mean == 0.0) return r;
    r.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(nd));
  r.p = student_t_two_tailed_p(r.t, nd - 1.0);
  return r;
}

/// Paired t-test over per-query reciprocal ranks; both reports must cover the same queries.
inline TTestResult paired_t_test(const EvalReport& a, const EvalReport& b) {
  if (a.reciprocal_ranks.size() != b.reciprocal_ranks.size())
    throw Error("reports cover different query sets");
  std::vector<double> xa, xb;
  for (const auto& [q, rr] : a.reciprocal_ranks) {
    auto it = b.reciprocal_ranks.find(q);
    if (it == b.reciprocal_ranks.end()) throw Error("reports cover different query sets (missing " + q + ")");
    xa.push_back(rr);
    xb.push_back(it->second);
  }
  return paired_t_test(xa, xb);
}

}  // namespace lce

#endif
