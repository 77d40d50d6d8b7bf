#include "bitext/corpus.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "bitext/error.hpp"

namespace bitext {
namespace {

TEST(ClampSimilarity, Examples) {
  EXPECT_EQ(clamp_similarity(0.5), 0.5);
  EXPECT_EQ(clamp_similarity(-0.2), 0.0);
  EXPECT_EQ(clamp_similarity(1.3), 1.0);
}

TEST(ClampSimilarity, RejectsNonFinite) {
  for (double bad : {std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::infinity(),
                     -std::numeric_limits<double>::infinity()}) {
    try {
      clamp_similarity(bad);
      FAIL() << "accepted " << bad;
    } catch (const Error& e) {
      EXPECT_STREQ(e.what(), "invalid score");
      EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
    }
  }
}

TEST(ScoredPair, NeverOutsideUnitInterval) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> wide(-1e6, 1e6);
  for (int i = 0; i < 10'000; ++i) {
    const double raw = i % 2 ? wide(rng) : std::ldexp(wide(rng), -20);
    const ScoredPair p({"id", "a", "b", {}}, raw, "test");
    ASSERT_GE(p.similarity(), 0.0);
    ASSERT_LE(p.similarity(), 1.0);
  }
}

TEST(SimilarityThreshold, DefaultAndRange) {
  EXPECT_EQ(SimilarityThreshold().value(), 0.7);
  EXPECT_TRUE(SimilarityThreshold().keeps(0.7));
  EXPECT_FALSE(SimilarityThreshold().keeps(0.6999999));
  EXPECT_THROW(SimilarityThreshold(1.01), Error);
  EXPECT_THROW(SimilarityThreshold(-0.01), Error);
  EXPECT_NO_THROW(SimilarityThreshold(0.0));
  EXPECT_NO_THROW(SimilarityThreshold(1.0));
}

TEST(DiscrepancyLabel, NamesRoundTrip) {
  for (const auto label : kAllLabels) {
    EXPECT_EQ(parse_label(to_string(label)), label);
  }
  EXPECT_FALSE(parse_label("accurate").has_value());
  EXPECT_EQ(to_string(DiscrepancyLabel::kDifferentMeaning), "DifferentMeaning");
}

TEST(CorpusStats, HistogramSumsToScored) {
  CorpusStats stats;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    const double s = i == 0 ? 1.0 : (i == 1 ? 0.0 : u(rng));
    stats.record_score(s, s >= 0.7);
  }
  std::uint64_t sum = 0;
  for (auto c : stats.score_histogram) sum += c;
  EXPECT_EQ(sum, stats.scored);
  EXPECT_EQ(stats.scored, stats.retained + stats.rejected);
  EXPECT_EQ(CorpusStats::bin_of(1.0), 19u);
  EXPECT_EQ(CorpusStats::bin_of(0.0), 0u);
  EXPECT_EQ(CorpusStats::bin_of(0.05), 1u);
}

TEST(CorpusStats, JsonRoundTrip) {
  CorpusStats stats;
  stats.total_read = 6;
  stats.duplicates_removed = 1;
  stats.record_score(0.9, true);
  stats.record_score(0.2, false);
  EXPECT_EQ(stats_from_json(nlohmann::json::parse(to_json(stats).dump())), stats);
  EXPECT_THROW(stats_from_json(nlohmann::json::parse(R"({"total_read":1})")), Error);
}

std::string random_text(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces = {
      "a", "Hello", "नमस्कार", "\"quoted\"", "back\\slash", "é", "\t", "日本",
      "😀", " ", "line\nbreak", "\x01"};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::string s;
  const auto n = 1 + rng() % 6;
  for (std::size_t i = 0; i < n; ++i) s += pieces[pick(rng)];
  return s;
}

// serialize(deserialize(line)) == line for every line serialize produces.
TEST(RecordSerialization, RoundTripIsByteExact) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    CorpusRecord r;
    r.pair.id = rng() % 5 ? "corpus:" + std::to_string(i) : "";
    r.pair.source_text = random_text(rng);
    r.pair.target_text = random_text(rng);
    if (rng() % 2) r.pair.meta["corpus"] = random_text(rng);
    if (rng() % 3) r.pair.meta["line"] = std::to_string(i);
    if (rng() % 2) r.score = u(rng);
    if (rng() % 2) r.scorer = "mock-trigram-v1/dim=256";

    const std::string line = serialize_record(r);
    const CorpusRecord back = deserialize_record(line);
    ASSERT_EQ(back, r);
    ASSERT_EQ(serialize_record(back), line);
  }
}

TEST(RecordSerialization, RejectsMalformed) {
  EXPECT_THROW(deserialize_record("not json"), Error);
  EXPECT_THROW(deserialize_record(R"({"src":"a"})"), Error);
  EXPECT_THROW(deserialize_record(R"({"src":"a","tgt":3})"), Error);
  EXPECT_THROW(deserialize_record(R"({"src":"a","tgt":"b","meta":{"k":1}})"), Error);
  EXPECT_THROW(deserialize_record(R"({"src":"a","tgt":"b","score":"high"})"), Error);
  EXPECT_THROW(deserialize_record(R"([1,2])"), Error);
}

}  // namespace
}  // namespace bitext
