#include <gtest/gtest.h>

#include "lce/corpus_io.hpp"
#include "tmpdir.hpp"

using namespace lce;

TEST(Corpus, ParsesFourColumns) {
  const auto docs = parse_corpus_tsv4("D1\tTitle\thttp://a\tbody text\n\nD2\t\t\tsecond\n");
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0], (Document{"D1", "Title", "http://a", "body text"}));
  EXPECT_EQ(docs[1].body, "second");
  EXPECT_TRUE(docs[1].title.empty());
}

TEST(Corpus, AcceptsCrlf) {
  const auto docs = parse_corpus_tsv4("D1\tt\tu\tb\r\n");
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_EQ(docs[0].body, "b");
}

TEST(Corpus, RejectsWrongColumnCountWithLine) {
  try {
    parse_corpus_tsv4("D1\tt\tu\tb\nD2\tt\tu\n", "c.tsv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("c.tsv:2"), std::string::npos) << e.what();
  }
}

TEST(Corpus, RejectsDuplicateIdsAndBadUtf8) {
  EXPECT_THROW(parse_corpus_tsv4("D1\ta\tb\tc\nD1\ta\tb\tc\n"), Error);
  EXPECT_THROW(parse_corpus_tsv4("D1\ta\tb\t\xff\xfe\n"), Error);
  EXPECT_THROW(parse_corpus_tsv4("\ta\tb\tc\n"), Error);
  EXPECT_NO_THROW(parse_corpus_tsv4("D1\ta\tb\tcaf\xc3\xa9\n"));
}

TEST(Corpus, UnknownFormatRejected) { EXPECT_THROW(load_corpus("/nonexistent", "jsonl"), Error); }

TEST(Corpus, RoundTrip) {
  TempDir dir;
  const std::vector<Document> docs{{"a", "T", "u", "x y"}, {"b", "", "", "z"}};
  write_corpus(docs, dir.file("c.tsv"));
  EXPECT_EQ(load_corpus(dir.file("c.tsv")), docs);
  const std::vector<Document> bad{{"a", "T", "u", "x\ty"}};
  EXPECT_THROW(write_corpus(bad, dir.file("bad.tsv")), Error);
}

TEST(Queries, ParseAndRoundTrip) {
  const auto qs = parse_queries("q1\thello world\nq2\tsecond\n");
  ASSERT_EQ(qs.size(), 2u);
  EXPECT_EQ(qs[1], (Query{"q2", "second"}));
  EXPECT_THROW(parse_queries("q1\n"), Error);
  EXPECT_THROW(parse_queries("q1\ta\nq1\tb\n"), Error);
  TempDir dir;
  write_queries(qs, dir.file("q.tsv"));
  EXPECT_EQ(load_queries(dir.file("q.tsv")), qs);
}

TEST(Qrels, GradesAndRelevance) {
  const auto q = parse_qrels("q1 0 d1 1\nq1 0 d2 0\nq2 0 d3 2\n");
  EXPECT_EQ(q.size(), 3u);
  EXPECT_EQ(q.grade("q2", "d3"), 2);
  EXPECT_EQ(q.grade("q2", "missing"), 0);
  EXPECT_TRUE(q.relevant("q1", "d1"));
  EXPECT_FALSE(q.relevant("q1", "d2"));
  EXPECT_EQ(q.relevant_docs("q1"), std::vector<std::string>{"d1"});
  EXPECT_FALSE(q.has_relevant("q3"));
}

TEST(Qrels, RejectsMalformed) {
  EXPECT_THROW(parse_qrels("q1 0 d1\n"), Error);
  EXPECT_THROW(parse_qrels("q1 0 d1 -1\n"), Error);
  EXPECT_THROW(parse_qrels("q1 0 d1 x\n"), Error);
  EXPECT_THROW(parse_qrels("q1 0 d1 1\nq1 0 d1 1\n"), Error);
}

TEST(Qrels, RestrictedTo) {
  const auto q = parse_qrels("q1 0 d1 1\nq2 0 d2 1\nq3 0 d3 1\n");
  const std::vector<Query> keep{{"q1", "x"}, {"q3", "y"}, {"q9", "z"}};
  const auto r = q.restricted_to(keep);
  EXPECT_EQ(r.size(), 2u);
  EXPECT_TRUE(r.relevant("q3", "d3"));
  EXPECT_FALSE(r.relevant("q2", "d2"));
}

TEST(Qrels, RoundTrip) {
  TempDir dir;
  const auto q = parse_qrels("q1 0 d1 1\nq1 0 d2 0\nq2 0 d3 2\n");
  write_qrels(q, dir.file("qrels"));
  EXPECT_EQ(load_qrels(dir.file("qrels")), q);
}

TEST(Run, FormatsSixColumns) {
  const std::vector<Ranking> r{{"q1", {{"d2", 2.5}, {"d1", 2.5}, {"d3", -1.0}}, "x"}};
  // Equal scores must appear in ascending doc_id order.
  EXPECT_THROW(format_run(to_run_entries(r, "bm25")), Error);
  const std::vector<Ranking> ok{{"q1", {{"d1", 2.5}, {"d2", 2.5}, {"d3", -1.0}}, "x"}};
  EXPECT_EQ(format_run(to_run_entries(ok, "bm25")),
            "q1 Q0 d1 1 2.500000 bm25\nq1 Q0 d2 2 2.500000 bm25\nq1 Q0 d3 3 -1.000000 bm25\n");
}

TEST(Run, ValidateRejectsGapsAndDuplicates) {
  std::vector<RunEntry> gap{{"q", "a", 1, 1.0, "t"}, {"q", "b", 3, 0.5, "t"}};
  EXPECT_THROW(validate_run(gap), Error);
  std::vector<RunEntry> dup{{"q", "a", 1, 1.0, "t"}, {"q", "a", 2, 0.5, "t"}};
  EXPECT_THROW(validate_run(dup), Error);
  std::vector<RunEntry> rising{{"q", "a", 1, 1.0, "t"}, {"q", "b", 2, 2.0, "t"}};
  EXPECT_THROW(validate_run(rising), Error);
  std::vector<RunEntry> tag{{"q", "a", 1, 1.0, "two words"}};
  EXPECT_THROW(format_run(tag), Error);
}

TEST(Run, ParseRejectsMalformed) {
  EXPECT_THROW(parse_run_entries("q Q0 d 1 1.0\n"), Error);
  EXPECT_THROW(parse_run_entries("q Q0 d one 1.0 t\n"), Error);
  EXPECT_THROW(parse_run_entries("q Q0 d 2 1.0 t\n"), Error);
}

TEST(Run, RoundTripKeepsOrderAndGrouping) {
  TempDir dir;
  const std::vector<Ranking> r{{"q2", {{"d9", 3.0}, {"d1", 1.0}}, "tag"}, {"q1", {{"d5", 0.25}}, "tag"}};
  write_run(r, "tag", dir.file("run"));
  const auto back = read_run(dir.file("run"));
  EXPECT_EQ(back, r);
}

TEST(Io, MissingFileReported) {
  try {
    load_queries("/nonexistent/queries.tsv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/queries.tsv"), std::string::npos);
  }
}
