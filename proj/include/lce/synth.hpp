#ifndef LCE_SYNTH_HPP
#define LCE_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "lce/corpus_io.hpp"
#include "lce/error.hpp"
#include "lce/inverted_index.hpp"
#include "lce/random.hpp"
#include "lce/retrieval.hpp"
#include "lce/text_analysis.hpp"

namespace lce {

/// Knobs of the synthetic retrieval benchmark.
///
/// Every query owns a disjoint set of topical terms plus one shared term.
/// Relevant documents mention every topical term (rarely all but one) at a
/// moderate rate. Around each query the generator places a cluster of
/// non-relevant documents; each slot becomes a topical confounder with
/// probability `confounder_strength`, otherwise it only carries the shared term.
/// Confounders come in three kinds:
///   - short: a fraction of the normal length, every topical term present
///     (with probability `full_cover_confounder`), each mentioned sparsely;
///   - verbose: long, all but one topical term, each repeated heavily;
///   - lookalike: relevant-length, full cover, sparse mentions.
/// BM25 with strong length normalization favours the short kind while query
/// likelihood favours the verbose kind, so first-stage pools differ in which
/// confounders they surface. Filler documents pad the corpus.
struct SynthConfig {
  std::size_t n_queries = 600;
  std::size_t n_dev_queries = 200;  // the last n_dev_queries queries form the dev split
  std::size_t n_docs = 160000;
  std::size_t topical_min = 2;
  std::size_t topical_max = 5;
  std::size_t topical_vocab = 0;  // 0: n_queries * topical_max
  std::size_t shared_vocab = 40;
  std::size_t background_vocab = 5000;
  double confounder_strength = 0.8;
  std::size_t relevant_per_query = 1;
  std::size_t cluster_size = 220;
  double doc_length_mean = 60.0;
  double doc_length_sigma = 0.25;
  double short_share = 0.4;
  double short_length_factor = 0.3;
  double verbose_length_factor = 8.0;
  double lookalike_share = 0.0;
  double full_cover_confounder = 0.8;  // short confounders carrying every topical term
  double relevant_tf = 1.0;            // extra Poisson mean per topical term in relevant docs
  double confounder_tf = 0.0;          // extra Poisson mean per topical term in short and lookalike docs
  double verbose_tf = 15.0;            // extra Poisson mean per topical term in verbose docs
  double relevant_miss = 0.03;         // chance a relevant doc omits one topical term
  double relevant_length_factor = 0.6;
  std::size_t retrievable_depth = 100;  // some relevant doc must reach this depth under retrievable_by; 0 disables
  RetrieverKind retrievable_by = RetrieverKind::bm25_tuned;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_queries == 0 || n_docs == 0 || relevant_per_query == 0) throw Error("synthetic counts must be positive");
    if (n_dev_queries >= n_queries) throw Error("dev split must leave training queries");
    if (topical_min == 0 || topical_min > topical_max) throw Error("invalid topical term range");
    auto prob = [](double p) { return p >= 0 && p <= 1; };
    if (!prob(confounder_strength)) throw Error("confounder strength must lie in [0, 1]");
    if (!prob(full_cover_confounder) || !prob(short_share) || !prob(lookalike_share) || !prob(relevant_miss))
      throw Error("confounder mix probabilities must lie in [0, 1]");
    if (!(relevant_tf >= 0 && confounder_tf >= 0 && verbose_tf >= 0)) throw Error("term rates must be non-negative");
    if (!(short_length_factor > 0 && verbose_length_factor > 0 && relevant_length_factor > 0))
      throw Error("length factors must be positive");
    if (shared_vocab == 0 || background_vocab == 0) throw Error("vocabularies must be non-empty");
    if (effective_topical_vocab() < n_queries * topical_max)
      throw Error("topical vocabulary too small to give every query its own terms");
    if (n_queries * (cluster_size + relevant_per_query) > n_docs)
      throw Error("n_docs too small for the query clusters");
    if (!(doc_length_mean >= 1) || !(doc_length_sigma >= 0)) throw Error("invalid document length parameters");
  }

  std::size_t effective_topical_vocab() const { return topical_vocab ? topical_vocab : n_queries * topical_max; }
};

struct SynthData {
  std::vector<Document> corpus;
  std::vector<Query> train_queries;
  std::vector<Query> dev_queries;
  QrelSet qrels;

  QrelSet train_qrels() const { return qrels.restricted_to(train_queries); }
  QrelSet dev_qrels() const { return qrels.restricted_to(dev_queries); }

  std::vector<Query> all_queries() const {
    auto q = train_queries;
    q.insert(q.end(), dev_queries.begin(), dev_queries.end());
    return q;
  }
};

namespace detail {

inline std::string numbered(char prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
  return buf;
}

class SynthWriter {
 public:
  SynthWriter(const SynthConfig& c, Rng& rng) : c_(c), rng_(rng) {
    // Zipf(1) cumulative weights over the background vocabulary.
    cdf_.resize(c.background_vocab);
    double acc = 0;
    for (std::size_t i = 0; i < cdf_.size(); ++i) cdf_[i] = acc += 1.0 / static_cast<double>(i + 1);
    for (auto& v : cdf_) v /= acc;
  }

  std::string background() {
    const double u = uniform01(rng_);
    const auto i = static_cast<std::size_t>(std::lower_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    return "w" + std::to_string(std::min(i, cdf_.size() - 1));
  }

  std::string shared() { return "s" + std::to_string(uniform_index(rng_, c_.shared_vocab)); }

  std::size_t length(double factor = 1.0) {
    const double l = c_.doc_length_mean * factor * std::exp(c_.doc_length_sigma * standard_normal(rng_) -
                                                            0.5 * c_.doc_length_sigma * c_.doc_length_sigma);
    return std::max<std::size_t>(8, static_cast<std::size_t>(std::lround(l)));
  }

  /// Pads `tokens` with background words up to `len`, shuffles, and splits off a short title.
  Document finish(std::vector<std::string> tokens, std::size_t len) {
    while (tokens.size() < len) tokens.push_back(background());
    shuffle(std::span<std::string>(tokens), rng_);
    const std::size_t title_len = std::min<std::size_t>(tokens.size(), 4);
    Document d;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      auto& field = i < title_len ? d.title : d.body;
      if (!field.empty()) field += ' ';
      field += tokens[i];
    }
    return d;
  }

  Rng& rng() { return rng_; }

 private:
  const SynthConfig& c_;
  Rng& rng_;
  std::vector<double> cdf_;
};

/// Adds single mentions of a query's least frequent topical term to its first
/// relevant doc until, under the current index statistics, the doc outscores
/// the BM25 result at `depth`. Rebuilds and repeats until every query finds a
/// relevant doc within that depth.
inline void ensure_retrievable(SynthData& data, const std::vector<std::vector<std::string>>& topics,
                               const std::vector<std::vector<std::size_t>>& relevant_pos, std::size_t depth,
                               RetrieverKind kind) {
  constexpr int kMaxRounds = 8;
  auto rc = RetrieverConfig::defaults(kind);
  rc.top_k = depth;
  const auto queries = data.all_queries();
  for (int round = 0; round <= kMaxRounds; ++round) {
    const auto index = build_index(data.corpus);
    bool all_found = true;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto r = retrieve(index, queries[q], rc);
      const bool found = std::any_of(r.docs.begin(), r.docs.end(), [&](const ScoredDoc& d) {
        return data.qrels.relevant(queries[q].query_id, d.doc_id);
      });
      if (found) continue;
      all_found = false;
      if (round == kMaxRounds) break;
      const double threshold = r.docs.size() < depth ? -1.0 : r.docs.back().score;
      auto& doc = data.corpus[relevant_pos[q].front()];
      std::map<std::string, std::uint32_t> tf;
      for (const auto& t : analyze(document_text(doc))) ++tf[t];
      std::size_t length = 0;
      for (const auto& [t, n] : tf) length += n;
      const auto tokens = index.analyze_query(queries[q].text);
      auto score = [&] {
        double sc = 0;
        for (const auto& t : tokens) {
          const auto it = tf.find(t);
          if (it == tf.end()) continue;
          const auto* e = index.find(t);
          sc += bm25_term_weight(bm25_idf(index.doc_count(), e ? e->document_frequency() : 0), it->second,
                                 static_cast<double>(length), index.avg_doc_length(), rc.bm25_k1, rc.bm25_b);
        }
        return sc;
      };
      while (score() <= threshold) {
        const auto& topic = topics[q];
        const auto least = *std::min_element(topic.begin(), topic.end(), [&](const auto& x, const auto& y) {
          return tf[x] < tf[y];
        });
        ++tf[least];
        ++length;
        doc.body += " " + least;
      }
    }
    if (all_found) return;
  }
  throw Error("synthetic config infeasible: some query has no relevant doc within BM25 depth " +
              std::to_string(depth));
}

}  // namespace detail

inline SynthData generate_synth(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  detail::SynthWriter w(config, rng);

  std::vector<std::size_t> topical_ids(config.effective_topical_vocab());
  for (std::size_t i = 0; i < topical_ids.size(); ++i) topical_ids[i] = i;
  shuffle(std::span<std::size_t>(topical_ids), rng);
  std::size_t next_topical = 0;

  struct Pending {
    Document doc;
    std::size_t query = SIZE_MAX;  // relevant to this query, if any
  };
  std::vector<Pending> docs;
  std::vector<std::vector<std::string>> topics;
  std::vector<Query> queries;
  queries.reserve(config.n_queries);

  for (std::size_t q = 0; q < config.n_queries; ++q) {
    const auto k = config.topical_min + uniform_index(rng, config.topical_max - config.topical_min + 1);
    std::vector<std::string> topic;
    for (std::size_t i = 0; i < k; ++i) topic.push_back("t" + std::to_string(topical_ids[next_topical++]));
    const auto shared = w.shared();
    topics.push_back(topic);

    std::vector<std::string> qterms = topic;
    qterms.push_back(shared);
    shuffle(std::span<std::string>(qterms), rng);
    std::string text;
    for (const auto& t : qterms) text += (text.empty() ? "" : " ") + t;
    queries.push_back({detail::numbered('Q', q + 1, 5), text});

    for (std::size_t r = 0; r < config.relevant_per_query; ++r) {
      std::vector<std::string> tokens;
      std::vector<std::string> covered = topic;
      if (covered.size() > 1 && bernoulli(rng, config.relevant_miss)) {
        shuffle(std::span<std::string>(covered), rng);
        covered.pop_back();
      }
      for (const auto& t : covered)
        for (std::uint64_t n = 1 + poisson(rng, config.relevant_tf); n > 0; --n) tokens.push_back(t);
      for (std::uint64_t n = 1 + poisson(rng, 0.5); n > 0; --n) tokens.push_back(shared);
      docs.push_back({w.finish(std::move(tokens), w.length(config.relevant_length_factor)), q});
    }
    for (std::size_t c = 0; c < config.cluster_size; ++c) {
      std::vector<std::string> tokens;
      double factor = 1.0;
      if (bernoulli(rng, config.confounder_strength)) {
        std::vector<std::string> subset = topic;
        shuffle(std::span<std::string>(subset), rng);
        double tf_mean;
        if (bernoulli(rng, config.lookalike_share)) {
          factor = config.relevant_length_factor;
          tf_mean = config.confounder_tf;
        } else if (bernoulli(rng, config.short_share)) {
          factor = config.short_length_factor;
          tf_mean = config.confounder_tf;
          if (!bernoulli(rng, config.full_cover_confounder) && subset.size() > 1) subset.pop_back();
        } else {
          factor = config.verbose_length_factor;
          tf_mean = config.verbose_tf;
          if (subset.size() > 1) subset.pop_back();
        }
        for (const auto& t : subset)
          for (std::uint64_t n = 1 + poisson(rng, tf_mean); n > 0; --n) tokens.push_back(t);
        for (std::uint64_t n = 1 + poisson(rng, 2.0); n > 0; --n) tokens.push_back(shared);
      } else {
        for (std::uint64_t n = 1 + poisson(rng, 1.0); n > 0; --n) tokens.push_back(shared);
      }
      docs.push_back({w.finish(std::move(tokens), w.length(factor)), SIZE_MAX});
    }
  }
  while (docs.size() < config.n_docs) {
    std::vector<std::string> tokens;
    for (std::uint64_t n = poisson(rng, 1.0); n > 0; --n) tokens.push_back(w.shared());
    docs.push_back({w.finish(std::move(tokens), w.length()), SIZE_MAX});
  }

  // Document ids are assigned after shuffling so id order carries no signal.
  shuffle(std::span<Pending>(docs), rng);
  SynthData out;
  std::vector<std::vector<std::size_t>> relevant_pos(queries.size());
  out.corpus.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto& d = docs[i].doc;
    d.doc_id = detail::numbered('D', i + 1, 7);
    d.url = "http://synth.example/" + d.doc_id;
    if (docs[i].query != SIZE_MAX) {
      out.qrels.add(queries[docs[i].query].query_id, d.doc_id, 1);
      relevant_pos[docs[i].query].push_back(i);
    }
    out.corpus.push_back(std::move(d));
  }
  const auto n_train = config.n_queries - config.n_dev_queries;
  out.train_queries.assign(queries.begin(), queries.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.dev_queries.assign(queries.begin() + static_cast<std::ptrdiff_t>(n_train), queries.end());
  if (config.retrievable_depth > 0)
    detail::ensure_retrievable(out, topics, relevant_pos, config.retrievable_depth, config.retrievable_by);
  return out;
}

}  // namespace lce

#endif
