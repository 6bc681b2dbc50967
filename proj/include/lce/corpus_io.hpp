#ifndef LCE_CORPUS_IO_HPP
#define LCE_CORPUS_IO_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lce/error.hpp"

namespace lce {

struct Document {
  std::string doc_id;
  std::string title;
  std::string url;
  std::string body;

  bool operator==(const Document&) const = default;
};

struct Query {
  std::string query_id;
  std::string text;

  bool operator==(const Query&) const = default;
};

/// Graded relevance judgments keyed by query then document. Grade >= 1 is relevant.
class QrelSet {
 public:
  void add(const std::string& query_id, const std::string& doc_id, int grade) {
    if (grade < 0) throw Error("negative relevance grade for (" + query_id + ", " + doc_id + ")");
    auto [it, inserted] = judgments_[query_id].emplace(doc_id, grade);
    if (!inserted) throw Error("duplicate judgment for (" + query_id + ", " + doc_id + ")");
  }

  /// Grade of the pair, 0 when unjudged.
  int grade(const std::string& query_id, const std::string& doc_id) const {
    auto q = judgments_.find(query_id);
    if (q == judgments_.end()) return 0;
    auto d = q->second.find(doc_id);
    return d == q->second.end() ? 0 : d->second;
  }

  bool relevant(const std::string& query_id, const std::string& doc_id) const {
    return grade(query_id, doc_id) >= 1;
  }

  /// Relevant doc_ids of a query in ascending doc_id order.
  std::vector<std::string> relevant_docs(const std::string& query_id) const {
    std::vector<std::string> out;
    auto q = judgments_.find(query_id);
    if (q == judgments_.end()) return out;
    for (const auto& [doc, g] : q->second)
      if (g >= 1) out.push_back(doc);
    return out;
  }

  bool has_relevant(const std::string& query_id) const { return !relevant_docs(query_id).empty(); }

  const std::map<std::string, std::map<std::string, int>>& judgments() const { return judgments_; }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [q, docs] : judgments_) n += docs.size();
    return n;
  }

  /// Judgments of the listed queries only.
  QrelSet restricted_to(std::span<const Query> queries) const {
    QrelSet out;
    for (const auto& q : queries)
      if (auto it = judgments_.find(q.query_id); it != judgments_.end()) out.judgments_.insert(*it);
    return out;
  }

  bool operator==(const QrelSet&) const = default;

 private:
  std::map<std::string, std::map<std::string, int>> judgments_;
};

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const ScoredDoc&) const = default;
};

/// Score descending, then doc_id ascending.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

inline void sort_ranked(std::vector<ScoredDoc>& docs) { std::sort(docs.begin(), docs.end(), ranks_before); }

/// Ordered candidate list for one query; position i holds rank i + 1.
struct Ranking {
  std::string query_id;
  std::vector<ScoredDoc> docs;
  std::string tag;

  bool operator==(const Ranking&) const = default;
};

struct RunEntry {
  std::string query_id;
  std::string doc_id;
  int rank = 0;
  double score = 0.0;
  std::string tag;

  bool operator==(const RunEntry&) const = default;
};

namespace detail {

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  const auto n = s.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += len;
  }
  return true;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (!valid_utf8(text)) throw Error("invalid UTF-8 in " + path);
  return text;
}

struct Line {
  std::size_t number;  // 1-based
  std::string_view text;
};

/// Non-blank lines with any trailing '\r' removed.
inline std::vector<Line> content_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t start = 0, number = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) lines.push_back({number, line});
    start = end + 1;
  }
  return lines;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cols.push_back(line.substr(start));
      return cols;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i == line.size()) break;
    auto j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    cols.push_back(line.substr(i, j - i));
    i = j;
  }
  return cols;
}

inline std::string where(const std::string& path, std::size_t line) { return path + ":" + std::to_string(line); }

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_double(std::string_view s, double& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

}  // namespace detail

// ---- corpus -------------------------------------------------------------

inline std::vector<Document> parse_corpus_tsv4(std::string_view text, const std::string& origin = "<corpus>") {
  if (!detail::valid_utf8(text)) throw Error("invalid UTF-8 in " + origin);
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& line : detail::content_lines(text)) {
    auto cols = detail::split_tabs(line.text);
    if (cols.size() != 4)
      throw Error(detail::where(origin, line.number) + ": expected 4 tab-separated columns, got " +
                  std::to_string(cols.size()));
    if (cols[0].empty()) throw Error(detail::where(origin, line.number) + ": empty doc_id");
    std::string id(cols[0]);
    auto [it, inserted] = seen.emplace(id, line.number);
    if (!inserted)
      throw Error(detail::where(origin, line.number) + ": duplicate doc_id " + id + " (first seen on line " +
                  std::to_string(it->second) + ")");
    docs.push_back({std::move(id), std::string(cols[1]), std::string(cols[2]), std::string(cols[3])});
  }
  return docs;
}

/// Loads a corpus. The only supported format is "tsv4": doc_id, title, url, body.
inline std::vector<Document> load_corpus(const std::string& path, std::string_view format = "tsv4") {
  if (format != "tsv4") throw Error("unknown corpus format: " + std::string(format));
  return parse_corpus_tsv4(detail::read_file(path), path);
}

inline void write_corpus(std::span<const Document> docs, const std::string& path) {
  std::string out;
  for (const auto& d : docs) {
    for (const auto* f : {&d.doc_id, &d.title, &d.url, &d.body})
      if (f->find_first_of("\t\n") != std::string::npos) throw Error("field contains tab or newline in " + d.doc_id);
    out += d.doc_id + '\t' + d.title + '\t' + d.url + '\t' + d.body + '\n';
  }
  detail::write_text(path, out);
}

// ---- queries ------------------------------------------------------------

inline std::vector<Query> parse_queries(std::string_view text, const std::string& origin = "<queries>") {
  if (!detail::valid_utf8(text)) throw Error("invalid UTF-8 in " + origin);
  std::vector<Query> queries;
  std::unordered_set<std::string> seen;
  for (const auto& line : detail::content_lines(text)) {
    auto cols = detail::split_tabs(line.text);
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty())
      throw Error(detail::where(origin, line.number) + ": expected \"query_id<TAB>text\"");
    std::string id(cols[0]);
    if (!seen.insert(id).second) throw Error(detail::where(origin, line.number) + ": duplicate query_id " + id);
    queries.push_back({std::move(id), std::string(cols[1])});
  }
  return queries;
}

inline std::vector<Query> load_queries(const std::string& path) {
  return parse_queries(detail::read_file(path), path);
}

inline void write_queries(std::span<const Query> queries, const std::string& path) {
  std::string out;
  for (const auto& q : queries) out += q.query_id + '\t' + q.text + '\n';
  detail::write_text(path, out);
}

// ---- qrels --------------------------------------------------------------

inline QrelSet parse_qrels(std::string_view text, const std::string& origin = "<qrels>") {
  if (!detail::valid_utf8(text)) throw Error("invalid UTF-8 in " + origin);
  QrelSet qrels;
  for (const auto& line : detail::content_lines(text)) {
    auto cols = detail::split_ws(line.text);
    if (cols.size() != 4)
      throw Error(detail::where(origin, line.number) + ": expected \"query_id 0 doc_id grade\"");
    int grade = 0;
    if (!detail::parse_int(cols[3], grade) || grade < 0)
      throw Error(detail::where(origin, line.number) + ": grade is not a non-negative integer: " +
                  std::string(cols[3]));
    try {
      qrels.add(std::string(cols[0]), std::string(cols[2]), grade);
    } catch (const Error& e) {
      throw Error(detail::where(origin, line.number) + ": " + e.what());
    }
  }
  return qrels;
}

inline QrelSet load_qrels(const std::string& path) { return parse_qrels(detail::read_file(path), path); }

inline void write_qrels(const QrelSet& qrels, const std::string& path) {
  std::string out;
  for (const auto& [q, docs] : qrels.judgments())
    for (const auto& [d, g] : docs) out += q + " 0 " + d + " " + std::to_string(g) + '\n';
  detail::write_text(path, out);
}

// ---- runs ---------------------------------------------------------------

/// Checks RunEntry invariants: per query, ranks 1..k in order, no duplicate
/// documents, scores non-increasing with ties in ascending doc_id order.
inline void validate_run(std::span<const RunEntry> entries) {
  std::unordered_map<std::string, const RunEntry*> last;
  std::unordered_map<std::string, std::unordered_set<std::string>> docs;
  for (const auto& e : entries) {
    if (e.query_id.empty() || e.doc_id.empty()) throw Error("run entry with empty id");
    auto& prev = last[e.query_id];
    const int expected = prev ? prev->rank + 1 : 1;
    if (e.rank != expected)
      throw Error("rank gap for query " + e.query_id + ": expected rank " + std::to_string(expected) + ", got " +
                  std::to_string(e.rank));
    if (!docs[e.query_id].insert(e.doc_id).second)
      throw Error("duplicate doc " + e.doc_id + " in ranking of query " + e.query_id);
    if (prev && ranks_before(ScoredDoc{e.doc_id, e.score}, ScoredDoc{prev->doc_id, prev->score}))
      throw Error("ranking of query " + e.query_id + " is not ordered at rank " + std::to_string(e.rank));
    prev = &e;
  }
}

inline std::vector<RunEntry> to_run_entries(std::span<const Ranking> rankings, const std::string& tag) {
  std::vector<RunEntry> entries;
  for (const auto& r : rankings)
    for (std::size_t i = 0; i < r.docs.size(); ++i)
      entries.push_back({r.query_id, r.docs[i].doc_id, static_cast<int>(i + 1), r.docs[i].score, tag});
  return entries;
}

inline std::string format_run_line(const RunEntry& e) {
  char score[64];
  std::snprintf(score, sizeof score, "%.6f", e.score);
  return e.query_id + " Q0 " + e.doc_id + " " + std::to_string(e.rank) + " " + score + " " + e.tag;
}

inline std::string format_run(std::span<const RunEntry> entries) {
  validate_run(entries);
  std::string out;
  for (const auto& e : entries) {
    if (e.tag.empty() || e.tag.find_first_of(" \t\n") != std::string::npos)
      throw Error("run tag must be a non-empty single token: '" + e.tag + "'");
    out += format_run_line(e);
    out += '\n';
  }
  return out;
}

inline void write_run(std::span<const RunEntry> entries, const std::string& path) {
  detail::write_text(path, format_run(entries));
}

/// Writes rankings in the six-column "qid Q0 docid rank score tag" format.
inline void write_run(std::span<const Ranking> rankings, const std::string& tag, const std::string& path) {
  write_run(std::span<const RunEntry>(to_run_entries(rankings, tag)), path);
}

inline std::vector<RunEntry> parse_run_entries(std::string_view text, const std::string& origin = "<run>") {
  if (!detail::valid_utf8(text)) throw Error("invalid UTF-8 in " + origin);
  std::vector<RunEntry> entries;
  std::unordered_map<std::string, int> last_rank;
  for (const auto& line : detail::content_lines(text)) {
    auto cols = detail::split_ws(line.text);
    RunEntry e;
    if (cols.size() != 6 || !detail::parse_int(cols[3], e.rank) || !detail::parse_double(cols[4], e.score))
      throw Error(detail::where(origin, line.number) + ": malformed run line");
    e.query_id = cols[0];
    e.doc_id = cols[2];
    e.tag = cols[5];
    int& prev = last_rank[e.query_id];
    if (e.rank != prev + 1)
      throw Error(detail::where(origin, line.number) + ": rank gap for query " + e.query_id + " (expected " +
                  std::to_string(prev + 1) + ", got " + std::to_string(e.rank) + ")");
    prev = e.rank;
    entries.push_back(std::move(e));
  }
  return entries;
}

/// Groups run entries into rankings, in order of first appearance of each query.
inline std::vector<Ranking> group_run(std::span<const RunEntry> entries) {
  std::vector<Ranking> rankings;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& e : entries) {
    auto [it, inserted] = slot.emplace(e.query_id, rankings.size());
    if (inserted) rankings.push_back({e.query_id, {}, e.tag});
    rankings[it->second].docs.push_back({e.doc_id, e.score});
  }
  return rankings;
}

inline std::vector<Ranking> read_run(const std::string& path) {
  auto entries = parse_run_entries(detail::read_file(path), path);
  return group_run(entries);
}

}  // namespace lce

#endif
