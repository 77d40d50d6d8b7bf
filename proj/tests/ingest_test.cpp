#include "bitext/ingest.hpp"

#include <random>

#include <gtest/gtest.h>

#include "bitext/error.hpp"
#include "test_util.hpp"

namespace bitext {
namespace {

using testing::TempDir;
using testing::write_file;

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize("  hello   world "), "hello world");
  EXPECT_EQ(normalize("abc"), "abc");
  // e + COMBINING ACUTE -> precomposed U+00E9
  EXPECT_EQ(normalize("e\xCC\x81"), "\xC3\xA9");
  EXPECT_EQ(normalize(""), "");
  EXPECT_EQ(normalize(" \t\n "), "");
}

TEST(Normalize, UnicodeWhitespaceAndNoCaseFolding) {
  // EM SPACE and IDEOGRAPHIC SPACE collapse like ASCII spaces.
  EXPECT_EQ(normalize("Hello\xE2\x80\x83 World\xE3\x80\x80!"), "Hello World !");
  EXPECT_EQ(normalize("ABC abc"), "ABC abc");
  // ZERO WIDTH SPACE is not White_Space.
  EXPECT_EQ(normalize("a\xE2\x80\x8B b"), "a\xE2\x80\x8B b");
  // U+0958 is a composition exclusion: NFC keeps KA + NUKTA decomposed.
  EXPECT_EQ(normalize("\xE0\xA5\x98"), "\xE0\xA4\x95\xE0\xA4\xBC");
  EXPECT_EQ(normalize("\xE0\xA4\x95\xE0\xA4\xBC"), "\xE0\xA4\x95\xE0\xA4\xBC");
}

TEST(Normalize, Idempotent) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> pieces = {
      " ", "\t", "a", "e", "\xCC\x81", "\xC3\xA9", "\xE0\xA5\x98",
      "\xE0\xA4\xA8", "\xE0\xA4\xBF", "\xE2\x80\x83", "Z",
      "\xE1\x84\x80\xE1\x85\xA1", "  ", "x\r\n"};
  for (int i = 0; i < 5000; ++i) {
    std::string s;
    const auto n = rng() % 10;
    for (std::size_t k = 0; k < n; ++k) s += pieces[rng() % pieces.size()];
    const std::string once = normalize(s);
    ASSERT_EQ(normalize(once), once) << "input: " << s;
  }
}

TEST(Utf8, Validation) {
  EXPECT_TRUE(is_valid_utf8("नमस्कार"));
  EXPECT_TRUE(is_valid_utf8(""));
  EXPECT_FALSE(is_valid_utf8("\xff"));
  EXPECT_FALSE(is_valid_utf8("abc\xe0\xa4"));  // truncated sequence
}

TEST(PairReader, TsvExamples) {
  TempDir dir;
  write_file(dir / "c.tsv",
             "Hello\tनमस्कार\n"
             "only one column\n"
             "a\tb\tcustom-id\n"
             "  spaced   out \t x \n"
             "a\tb\tc\td\n"
             "\xff\tbad\n"
             "   \tempty source\n");
  PairReader reader(dir / "c.tsv", CorpusFormat::kTsv);
  auto r1 = reader.next();
  ASSERT_TRUE(r1);
  EXPECT_EQ(r1->pair.source_text, "Hello");
  EXPECT_EQ(r1->pair.target_text, "नमस्कार");
  EXPECT_EQ(r1->pair.id, "c:1");

  auto r2 = reader.next();
  ASSERT_TRUE(r2);
  EXPECT_EQ(r2->pair.id, "custom-id");
  auto r3 = reader.next();
  ASSERT_TRUE(r3);
  EXPECT_EQ(r3->pair.source_text, "spaced out");
  EXPECT_EQ(r3->pair.target_text, "x");
  EXPECT_EQ(r3->pair.id, "c:4");
  EXPECT_FALSE(reader.next());
  EXPECT_EQ(reader.skipped(), 4u);
}

TEST(PairReader, JsonlExamples) {
  TempDir dir;
  write_file(dir / "c.jsonl",
             R"({"src":"a","tgt":"b","id":"x9"})" "\n"
             R"({"src":"a","tgt":"b","meta":{"corpus":"bpcc"},"score":0.5,"scorer":"m"})" "\n"
             "{broken\n"
             R"({"src":"a"})" "\n");
  const auto records = read_all(dir / "c.jsonl", CorpusFormat::kJsonl);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].pair.id, "x9");
  EXPECT_EQ(records[1].pair.id, "c:2");
  EXPECT_EQ(records[1].pair.meta.at("corpus"), "bpcc");
  EXPECT_EQ(records[1].score, 0.5);
  EXPECT_EQ(records[1].scorer, "m");
}

TEST(PairReader, RawModeKeepsOriginalText) {
  TempDir dir;
  write_file(dir / "c.tsv", "a  b\tc\n");
  const auto records = read_all(dir / "c.tsv", CorpusFormat::kTsv,
                                ReaderOptions{.normalize_text = false, .corpus_name = "bpcc"});
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].pair.source_text, "a  b");
  EXPECT_EQ(records[0].pair.id, "bpcc:1");
}

TEST(PairReader, MissingFileIsFatal) {
  EXPECT_THROW(PairReader("/nonexistent/file.tsv", CorpusFormat::kTsv), Error);
}

TEST(PairWriter, RoundTripBothFormats) {
  TempDir dir;
  const std::vector<SentencePair> pairs = {
      {"c:1", "Hello", "नमस्कार", {}},
      {"c:2", "The \"quoted\" one", "दुसरे", {}},
      {"c:3", "third", "तिसरे", {}},
  };
  for (const auto format : {CorpusFormat::kTsv, CorpusFormat::kJsonl}) {
    const auto path = dir / (format == CorpusFormat::kTsv ? "out.tsv" : "out.jsonl");
    EXPECT_EQ(write_pairs(pairs, path, format), 3u);
    const auto back = read_all(path, format);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < pairs.size(); ++i) EXPECT_EQ(back[i].pair, pairs[i]);
  }
}

TEST(PairWriter, EmptyStream) {
  TempDir dir;
  EXPECT_EQ(write_pairs(std::span<const SentencePair>{}, dir / "e.jsonl",
                        CorpusFormat::kJsonl),
            0u);
  EXPECT_EQ(testing::read_file(dir / "e.jsonl"), "");
  EXPECT_TRUE(read_all(dir / "e.jsonl", CorpusFormat::kJsonl).empty());
}

TEST(PairWriter, TabInTsvIsAnError) {
  TempDir dir;
  PairWriter writer(dir / "t.tsv", CorpusFormat::kTsv);
  try {
    writer.write(SentencePair{"1", "has\ttab", "x", {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "unencodable in TSV; use JSONL");
  }
  // JSONL carries it fine.
  PairWriter json(dir / "t.jsonl", CorpusFormat::kJsonl);
  EXPECT_NO_THROW(json.write(SentencePair{"1", "has\ttab", "x", {}}));
}

TEST(PairWriter, UnwritablePathIsFatal) {
  EXPECT_THROW(PairWriter("/nonexistent-dir/x.jsonl", CorpusFormat::kJsonl), Error);
}

TEST(Formats, FromPath) {
  EXPECT_EQ(format_from_path("a/b.tsv"), CorpusFormat::kTsv);
  EXPECT_EQ(format_from_path("a/b.jsonl"), CorpusFormat::kJsonl);
  EXPECT_FALSE(format_from_path("a/b").has_value());
  EXPECT_FALSE(format_from_path("a/b.csv").has_value());
}

}  // namespace
}  // namespace bitext
