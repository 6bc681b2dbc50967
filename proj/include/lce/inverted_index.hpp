#ifndef LCE_INVERTED_INDEX_HPP
#define LCE_INVERTED_INDEX_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "lce/binary_io.hpp"
#include "lce/corpus_io.hpp"
#include "lce/error.hpp"
#include "lce/text_analysis.hpp"

namespace lce {

struct Posting {
  std::uint32_t doc_ordinal = 0;
  std::uint32_t term_frequency = 0;

  bool operator==(const Posting&) const = default;
};

struct TermEntry {
  std::vector<Posting> postings;  // ascending doc_ordinal
  std::uint64_t collection_frequency = 0;

  std::size_t document_frequency() const { return postings.size(); }
  bool operator==(const TermEntry&) const = default;
};

struct DocInfo {
  std::string doc_id;
  std::uint32_t length = 0;  // analyzed tokens

  bool operator==(const DocInfo&) const = default;
};

/// Immutable term -> postings map with the per-document and collection
/// statistics needed by the retrievers and the reranker features.
class InvertedIndex {
 public:
  InvertedIndex() = default;

  std::size_t doc_count() const { return docs_.size(); }
  std::uint64_t total_tokens() const { return total_tokens_; }
  double avg_doc_length() const {
    return docs_.empty() ? 0.0 : static_cast<double>(total_tokens_) / static_cast<double>(docs_.size());
  }
  const AnalyzerConfig& analyzer() const { return analyzer_; }

  const DocInfo& doc(std::uint32_t ordinal) const { return docs_.at(ordinal); }
  const std::vector<DocInfo>& docs() const { return docs_; }

  std::optional<std::uint32_t> ordinal_of(const std::string& doc_id) const {
    auto it = ordinals_.find(doc_id);
    if (it == ordinals_.end()) return std::nullopt;
    return it->second;
  }

  const TermEntry* find(const std::string& term) const {
    auto it = terms_.find(term);
    return it == terms_.end() ? nullptr : &it->second;
  }

  std::span<const Posting> postings(const std::string& term) const {
    const auto* e = find(term);
    return e ? std::span<const Posting>(e->postings) : std::span<const Posting>();
  }

  std::size_t document_frequency(const std::string& term) const {
    const auto* e = find(term);
    return e ? e->document_frequency() : 0;
  }

  std::uint64_t collection_frequency(const std::string& term) const {
    const auto* e = find(term);
    return e ? e->collection_frequency : 0;
  }

  std::uint32_t term_frequency(const std::string& term, std::uint32_t ordinal) const {
    const auto* e = find(term);
    return e ? term_frequency(*e, ordinal) : 0;
  }

  static std::uint32_t term_frequency(const TermEntry& entry, std::uint32_t ordinal) {
    auto it = std::lower_bound(entry.postings.begin(), entry.postings.end(), ordinal,
                               [](const Posting& p, std::uint32_t o) { return p.doc_ordinal < o; });
    return (it != entry.postings.end() && it->doc_ordinal == ordinal) ? it->term_frequency : 0;
  }

  const std::unordered_map<std::string, TermEntry>& terms() const { return terms_; }

  /// Analyzes query text with the same configuration the index was built with.
  std::vector<std::string> analyze_query(std::string_view text) const {
    AnalyzerConfig cfg = analyzer_;
    cfg.max_tokens = kUnlimitedTokens;
    return analyze(text, cfg);
  }

  bool operator==(const InvertedIndex& o) const {
    return docs_ == o.docs_ && terms_ == o.terms_ && total_tokens_ == o.total_tokens_ &&
           analyzer_.lowercase == o.analyzer_.lowercase && analyzer_.stopwords == o.analyzer_.stopwords &&
           analyzer_.max_tokens == o.analyzer_.max_tokens;
  }

  friend InvertedIndex build_index(std::span<const Document>, const AnalyzerConfig&, unsigned);
  friend InvertedIndex deserialize_index(binary::Reader&);

 private:
  void finish() {
    ordinals_.clear();
    for (std::uint32_t i = 0; i < docs_.size(); ++i) ordinals_.emplace(docs_[i].doc_id, i);
  }

  std::vector<DocInfo> docs_;
  std::unordered_map<std::string, TermEntry> terms_;
  std::unordered_map<std::string, std::uint32_t> ordinals_;
  std::uint64_t total_tokens_ = 0;
  AnalyzerConfig analyzer_;
};

namespace detail {

struct IndexShard {
  std::vector<std::uint32_t> lengths;
  std::unordered_map<std::string, std::vector<Posting>> postings;
};

inline IndexShard index_shard(std::span<const Document> corpus, std::uint32_t first, std::uint32_t last,
                              const AnalyzerConfig& config) {
  IndexShard shard;
  std::map<std::string, std::uint32_t> counts;
  for (std::uint32_t ord = first; ord < last; ++ord) {
    const auto tokens = analyze(document_text(corpus[ord]), config);
    shard.lengths.push_back(static_cast<std::uint32_t>(tokens.size()));
    counts.clear();
    for (const auto& t : tokens) ++counts[t];
    for (const auto& [term, tf] : counts) shard.postings[term].push_back({ord, tf});
  }
  return shard;
}

}  // namespace detail

/// Builds the index over the corpus; ordinals follow corpus order. With more
/// than one thread the corpus is split into contiguous shards whose posting
/// lists are concatenated in shard order, so the result does not depend on
/// the thread count.
inline InvertedIndex build_index(std::span<const Document> corpus, const AnalyzerConfig& config = {},
                                 unsigned threads = 1) {
  if (corpus.empty()) throw Error("cannot build an index over an empty corpus");
  if (corpus.size() > UINT32_MAX) throw Error("corpus too large");

  InvertedIndex index;
  index.analyzer_ = config;
  for (const auto& d : corpus) {
    if (d.doc_id.empty()) throw Error("document with empty doc_id");
    index.docs_.push_back({d.doc_id, 0});
  }
  index.finish();
  if (index.ordinals_.size() != corpus.size()) {
    std::unordered_map<std::string, int> seen;
    for (const auto& d : corpus)
      if (++seen[d.doc_id] == 2) throw Error("duplicate doc_id " + d.doc_id);
  }

  const auto n = static_cast<std::uint32_t>(corpus.size());
  const auto shards = std::max(1u, std::min<unsigned>(threads, n));
  std::vector<detail::IndexShard> parts(shards);
  std::vector<std::uint32_t> bounds(shards + 1);
  for (unsigned s = 0; s <= shards; ++s) bounds[s] = static_cast<std::uint32_t>(std::uint64_t(n) * s / shards);
  if (shards == 1) {
    parts[0] = detail::index_shard(corpus, 0, n, config);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned s = 0; s < shards; ++s)
      workers.emplace_back([&, s] { parts[s] = detail::index_shard(corpus, bounds[s], bounds[s + 1], config); });
  }

  for (unsigned s = 0; s < shards; ++s) {
    for (std::uint32_t i = 0; i < parts[s].lengths.size(); ++i) {
      index.docs_[bounds[s] + i].length = parts[s].lengths[i];
      index.total_tokens_ += parts[s].lengths[i];
    }
    for (auto& [term, list] : parts[s].postings) {
      auto& entry = index.terms_[term];
      for (const auto& p : list) entry.collection_frequency += p.term_frequency;
      entry.postings.insert(entry.postings.end(), list.begin(), list.end());
    }
  }
  return index;
}

// ---- persistence ----------------------------------------------------------

inline constexpr std::string_view kIndexMagic = "LCEINDX\x01";
inline constexpr std::uint32_t kIndexVersion = 1;

inline void serialize_index(const InvertedIndex& index, binary::Writer& w) {
  w.header(kIndexMagic, kIndexVersion);
  const auto& a = index.analyzer();
  w.u32(a.lowercase ? 1 : 0);
  w.u64(a.max_tokens);
  w.u64(a.stopwords.size());
  for (const auto& s : a.stopwords) w.str(s);

  w.u64(index.total_tokens());
  w.u64(index.doc_count());
  for (const auto& d : index.docs()) {
    w.str(d.doc_id);
    w.u32(d.length);
  }

  std::vector<const std::pair<const std::string, TermEntry>*> sorted;
  sorted.reserve(index.terms().size());
  for (const auto& kv : index.terms()) sorted.push_back(&kv);
  std::sort(sorted.begin(), sorted.end(), [](auto* x, auto* y) { return x->first < y->first; });
  w.u64(sorted.size());
  for (const auto* kv : sorted) {
    w.str(kv->first);
    w.u64(kv->second.collection_frequency);
    w.u64(kv->second.postings.size());
    for (const auto& p : kv->second.postings) {
      w.u32(p.doc_ordinal);
      w.u32(p.term_frequency);
    }
  }
}

inline InvertedIndex deserialize_index(binary::Reader& r) {
  r.header(kIndexMagic, kIndexVersion);
  InvertedIndex index;
  index.analyzer_.lowercase = r.u32() != 0;
  index.analyzer_.max_tokens = r.u64();
  const auto n_stop = r.count(8);
  for (std::uint64_t i = 0; i < n_stop; ++i) index.analyzer_.stopwords.insert(r.str());

  index.total_tokens_ = r.u64();
  const auto n_docs = r.count(12);
  index.docs_.reserve(n_docs);
  std::uint64_t length_sum = 0;
  for (std::uint64_t i = 0; i < n_docs; ++i) {
    DocInfo d;
    d.doc_id = r.str();
    d.length = r.u32();
    length_sum += d.length;
    index.docs_.push_back(std::move(d));
  }
  if (length_sum != index.total_tokens_) throw Error("corrupt index: document lengths do not sum to total tokens");

  const auto n_terms = r.count(24);
  for (std::uint64_t i = 0; i < n_terms; ++i) {
    auto term = r.str();
    TermEntry e;
    e.collection_frequency = r.u64();
    const auto n_post = r.count(8);
    e.postings.resize(n_post);
    std::uint64_t cf = 0;
    for (auto& p : e.postings) {
      p.doc_ordinal = r.u32();
      p.term_frequency = r.u32();
      if (p.doc_ordinal >= n_docs || p.term_frequency == 0) throw Error("corrupt index: bad posting for " + term);
      cf += p.term_frequency;
    }
    if (cf != e.collection_frequency) throw Error("corrupt index: collection frequency mismatch for " + term);
    index.terms_.emplace(std::move(term), std::move(e));
  }
  r.expect_end();
  index.finish();
  return index;
}

inline void save_index(const InvertedIndex& index, const std::string& path) {
  binary::Writer w;
  serialize_index(index, w);
  w.save(path);
}

inline InvertedIndex load_index(const std::string& path) {
  auto r = binary::Reader::open(path);
  return deserialize_index(r);
}

}  // namespace lce

#endif
