#include "bitext/similarity.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "bitext/error.hpp"
#include "bitext/ingest.hpp"
#include "bitext/remote_provider.hpp"
#include "bitext/score_cache.hpp"
#include "stub_provider.hpp"
#include "test_util.hpp"

namespace bitext {
namespace {

using testing::TableProvider;

TEST(EmbedBatch, Examples) {
  MockProvider mock(kMockDim, 2);
  const std::vector<std::string> same = {"a", "a"};
  const auto e = embed_batch(same, mock);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0], e[1]);
  EXPECT_EQ(e[0].dim(), kMockDim);

  EXPECT_TRUE(embed_batch(std::span<const std::string>{}, mock).empty());

  const std::vector<std::string> three = {"a", "b", "c"};
  try {
    embed_batch(three, mock);
    FAIL();
  } catch (const Error& err) {
    EXPECT_STREQ(err.what(), "batch too large");
  }
}

TEST(EmbedBatch, DimensionMismatchIsFatal) {
  TableProvider bad({{"x", {1.0, 2.0, 3.0}}}, 4);
  const std::vector<std::string> texts = {"x"};
  EXPECT_THROW(embed_batch(texts, bad), Error);
}

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine({{0.3, 0.4}}, {{0.3, 0.4}}), 1.0);
  EXPECT_EQ(cosine({{1, 0}}, {{0, 1}}), 0.0);
  EXPECT_NEAR(cosine({{1, 0}}, {{1, 1}}), 0.70710678, 1e-8);
  EXPECT_NEAR(cosine({{1, 0}}, {{1, 1}}), std::sqrt(2.0) / 2.0, 1e-9);
}

TEST(Cosine, Errors) {
  try {
    cosine({{0, 0}}, {{1, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "undefined similarity");
  }
  EXPECT_THROW(cosine({{1, 0}}, {{1, 0, 0}}), Error);
}

TEST(Cosine, SymmetryAndScaleInvariance) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> k(1e-3, 1e3);
  for (int i = 0; i < 2000; ++i) {
    Embedding a, b;
    const auto dim = 1 + rng() % 64;
    for (std::size_t d = 0; d < dim; ++d) {
      a.values.push_back(n(rng));
      b.values.push_back(n(rng));
    }
    ASSERT_EQ(cosine(a, b), cosine(b, a));
    const double c = cosine(a, b);
    ASSERT_GE(c, -1.0);
    ASSERT_LE(c, 1.0);
    Embedding scaled = a;
    const double factor = k(rng);
    for (double& v : scaled.values) v *= factor;
    ASSERT_NEAR(cosine(scaled, b), c, 1e-9);
  }
}

// Bucket indices come from an independent mmh3-based computation.
Embedding embedding_from_buckets(const std::vector<int>& buckets, std::size_t dim) {
  Embedding e;
  e.values.assign(dim, 0.0);
  for (int b : buckets) e.values[static_cast<std::size_t>(b)] += 1.0;
  double norm = 0.0;
  for (double v : e.values) norm += v * v;
  for (double& v : e.values) v /= std::sqrt(norm);
  return e;
}

TEST(MockEmbed, MatchesOracleBuckets) {
  const auto buckets = testing::golden_expected()["mock_buckets"];
  for (const auto& [text, list] : buckets.items()) {
    const Embedding expected = embedding_from_buckets(list.get<std::vector<int>>(), kMockDim);
    const Embedding actual = mock_embed(text);
    ASSERT_EQ(actual.dim(), kMockDim);
    for (std::size_t i = 0; i < kMockDim; ++i) {
      EXPECT_NEAR(actual.values[i], expected.values[i], 1e-12) << text << " bucket " << i;
    }
  }
}

TEST(MockEmbed, Determinism) {
  EXPECT_EQ(mock_embed("abc"), mock_embed("abc"));
  EXPECT_DOUBLE_EQ(cosine(mock_embed("abcdef"), mock_embed("abcdef")), 1.0);
}

TEST(MockEmbed, DisjointTrigramsScoreZero) {
  // Oracle buckets: "aaaa" -> {177}, "zzzz" -> {197}.
  const auto buckets = testing::golden_expected()["mock_buckets"];
  ASSERT_EQ(buckets["aaaa"][0], 177);
  ASSERT_EQ(buckets["zzzz"][0], 197);
  EXPECT_NEAR(cosine(mock_embed("aaaa"), mock_embed("zzzz")), 0.0, 1e-6);

  MockProvider mock;
  const ScoredPair s = score_pair({"x", "aaaa", "zzzz", {}}, mock);
  EXPECT_NEAR(s.similarity(), 0.0, 1e-6);
  EXPECT_EQ(s.scorer_id(), mock.provider_id());
}

TEST(MockEmbed, BucketCollisionIsVisible) {
  // "abc" and "xyz" share no trigram but hash to the same bucket (147).
  EXPECT_DOUBLE_EQ(cosine(mock_embed("abc"), mock_embed("xyz")), 1.0);
}

TEST(MockEmbed, ShortTextFallback) {
  const Embedding one = mock_embed("a");
  const Embedding two = mock_embed("ab");
  EXPECT_GT(cosine(one, two), 0.0);  // shared 1-gram "a"
  EXPECT_EQ(mock_embed("").values, std::vector<double>(kMockDim, 0.0));
}

TEST(ScorePair, SelfSimilarityForAllTexts) {
  MockProvider mock;
  std::mt19937_64 rng(23);
  const std::string alphabet = "abcdefghij ";
  for (int i = 0; i < 500; ++i) {
    std::string t;
    const auto len = 1 + rng() % 40;
    for (std::size_t k = 0; k < len; ++k) t.push_back(alphabet[rng() % alphabet.size()]);
    if (normalize(t).empty()) continue;
    ASSERT_NEAR(score_pair({"id", t, t, {}}, mock).similarity(), 1.0, 1e-6) << t;
  }
  EXPECT_NEAR(score_pair({"id", "नमस्कार मित्रा", "नमस्कार मित्रा", {}}, mock).similarity(),
              1.0, 1e-6);
}

TEST(ScorePair, NegativeCosineClampsToZero) {
  TableProvider table({{"src", {1.0, 0.0}}, {"tgt", {-0.1, std::sqrt(0.99)}}}, 2);
  const Embedding a{{1.0, 0.0}};
  const Embedding b{{-0.1, std::sqrt(0.99)}};
  ASSERT_NEAR(cosine(a, b), -0.1, 1e-12);
  EXPECT_EQ(score_pair({"id", "src", "tgt", {}}, table).similarity(), 0.0);
}

TEST(ScorePairs, OrderPreservedAcrossJobs) {
  MockProvider mock(kMockDim, 8);
  std::vector<SentencePair> pairs;
  for (int i = 0; i < 200; ++i) {
    pairs.push_back({"p" + std::to_string(i), "source sentence " + std::to_string(i),
                     "target " + std::to_string(i * 7 % 13), {}});
  }
  const auto one = score_pairs(pairs, mock, 1);
  const auto four = score_pairs(pairs, mock, 4);
  ASSERT_EQ(one.scores.size(), pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    ASSERT_TRUE(one.scores[i]);
    ASSERT_TRUE(four.scores[i]);
    EXPECT_EQ(*one.scores[i], *four.scores[i]);
    EXPECT_EQ(one.scores[i]->pair(), pairs[i]);
    EXPECT_EQ(one.scores[i]->similarity(), score_pair(pairs[i], mock).similarity());
  }
}

TEST(ScorePairs, FailingPairsAreIsolated) {
  TableProvider table({}, 16, 8);
  std::vector<SentencePair> pairs;
  for (int i = 0; i < 10; ++i) {
    pairs.push_back({"p" + std::to_string(i), i == 3 ? "FAIL here" : "ok " + std::to_string(i),
                     "target", {}});
  }
  const auto result = score_pairs(pairs, table, 2);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i == 3) {
      EXPECT_FALSE(result.scores[i]);
      EXPECT_NE(result.errors[i].find("boom"), std::string::npos);
    } else {
      EXPECT_TRUE(result.scores[i]) << i;
    }
  }
}

TEST(FilterByThreshold, Examples) {
  const auto make = [](std::vector<double> scores) {
    std::vector<ScoredPair> out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      out.emplace_back(SentencePair{std::to_string(i), "s", "t", {}}, scores[i], "x");
    }
    return out;
  };
  const auto input = make({0.65, 0.70, 0.90});
  CorpusStats stats;
  const auto r = filter_by_threshold(input, SimilarityThreshold(0.7), &stats);
  ASSERT_EQ(r.kept.size(), 2u);
  EXPECT_EQ(r.kept[0].similarity(), 0.70);
  EXPECT_EQ(r.kept[1].similarity(), 0.90);
  ASSERT_EQ(r.rejected.size(), 1u);
  EXPECT_EQ(r.rejected[0].similarity(), 0.65);
  EXPECT_EQ(stats.retained, 2u);
  EXPECT_EQ(stats.rejected, 1u);

  EXPECT_EQ(filter_by_threshold(input, SimilarityThreshold(0.0)).kept.size(), 3u);
  EXPECT_EQ(filter_by_threshold(input, SimilarityThreshold(1.0)).rejected.size(), 3u);
}

// --- remote provider -------------------------------------------------------

class EmbeddingServer {
 public:
  explicit EmbeddingServer(int failures_before_success = 0, int status_on_failure = 503)
      : failures_left_(failures_before_success) {
    server_.Post("/embed", [this, status_on_failure](const httplib::Request& req,
                                                      httplib::Response& res) {
      ++requests;
      if (failures_left_ != 0) {
        if (failures_left_ > 0) --failures_left_;
        res.status = status_on_failure;
        return;
      }
      const auto j = nlohmann::json::parse(req.body);
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& t : j.at("texts")) rows.push_back(mock_embed(t.get<std::string>(), 32).values);
      res.set_content(nlohmann::json{{"embeddings", rows}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~EmbeddingServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/embed"; }
  std::atomic<int> requests{0};

 private:
  httplib::Server server_;
  std::atomic<int> failures_left_;
  int port_ = 0;
  std::thread thread_;
};

RemoteProviderOptions remote_options(const std::string& url) {
  RemoteProviderOptions o;
  o.url = url;
  o.dim = 32;
  o.batch_limit = 8;
  o.initial_backoff = std::chrono::milliseconds(5);
  o.timeout = std::chrono::seconds(5);
  return o;
}

TEST(RemoteProvider, WireFormatRoundTrip) {
  EmbeddingServer server;
  RemoteProvider remote(remote_options(server.url()));
  const std::vector<std::string> texts = {"hello world", "नमस्कार"};
  const auto e = embed_batch(texts, remote);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0], mock_embed("hello world", 32));
  EXPECT_EQ(e[1], mock_embed("नमस्कार", 32));
}

TEST(RemoteProvider, RetriesTransientFailures) {
  EmbeddingServer server(2);
  RemoteProvider remote(remote_options(server.url()));
  const std::vector<std::string> texts = {"abc"};
  EXPECT_NO_THROW(embed_batch(texts, remote));
  EXPECT_EQ(server.requests.load(), 3);
}

TEST(RemoteProvider, GivesUpAfterRetryBudget) {
  EmbeddingServer server(-1);
  RemoteProvider remote(remote_options(server.url()));
  const std::vector<std::string> texts = {"abc"};
  try {
    embed_batch(texts, remote);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.retryable());
    EXPECT_EQ(e.kind(), ErrorKind::kProvider);
  }
  EXPECT_EQ(server.requests.load(), 4);  // first try + 3 retries
}

TEST(RemoteProvider, ClientErrorsAreNotRetried) {
  EmbeddingServer server(-1, 400);
  RemoteProvider remote(remote_options(server.url()));
  const std::vector<std::string> texts = {"abc"};
  EXPECT_THROW(embed_batch(texts, remote), Error);
  EXPECT_EQ(server.requests.load(), 1);
}

TEST(RemoteProvider, UnreachableServiceIsProviderError) {
  auto options = remote_options("http://127.0.0.1:1/embed");
  options.max_retries = 1;
  RemoteProvider remote(options);
  const std::vector<std::string> texts = {"abc"};
  try {
    embed_batch(texts, remote);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kProvider);
  }
}

TEST(RemoteProvider, DimensionMismatchIsFatal) {
  EmbeddingServer server;
  auto options = remote_options(server.url());
  options.dim = 64;
  RemoteProvider remote(options);
  const std::vector<std::string> texts = {"abc"};
  try {
    embed_batch(texts, remote);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }
}

// --- cache -------------------------------------------------------------------

TEST(CachingProvider, HitsAfterFirstEmbedAndAcrossReopen) {
  testing::TempDir dir;
  const auto path = dir / "cache.jsonl";
  const std::vector<std::string> texts = {"alpha", "beta", "alpha"};
  std::vector<Embedding> first;
  {
    CachingProvider cache(std::make_unique<MockProvider>(), path);
    first = embed_batch(texts, cache);
    EXPECT_EQ(cache.misses(), 3u);
    EXPECT_EQ(cache.size(), 2u);
    EXPECT_EQ(embed_batch(texts, cache), first);
    EXPECT_EQ(cache.hits(), 3u);
  }
  auto inner = std::make_unique<TableProvider>(std::map<std::string, std::vector<double>>{},
                                               kMockDim, 1024);
  auto* inner_ptr = inner.get();
  // Same provider id is required for hits; a different id starts cold.
  CachingProvider other(std::move(inner), path);
  EXPECT_EQ(other.size(), 0u);
  embed_batch(texts, other);
  EXPECT_EQ(inner_ptr->calls.load(), 1);

  CachingProvider reopened(std::make_unique<MockProvider>(), path);
  EXPECT_EQ(reopened.size(), 2u);
  EXPECT_EQ(embed_batch(texts, reopened), first);
  EXPECT_EQ(reopened.misses(), 0u);
}

TEST(CachingProvider, IgnoresTruncatedTail) {
  testing::TempDir dir;
  const auto path = dir / "cache.jsonl";
  {
    CachingProvider cache(std::make_unique<MockProvider>(), path);
    const std::vector<std::string> texts = {"alpha"};
    embed_batch(texts, cache);
  }
  {
    std::ofstream out(path, std::ios::app);
    out << R"({"provider":"mock-trigram-v1/dim=256","key":"00)";
  }
  CachingProvider cache(std::make_unique<MockProvider>(), path);
  EXPECT_EQ(cache.size(), 1u);
}

}  // namespace
}  // namespace bitext
