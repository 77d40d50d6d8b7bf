#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bitext/corpus.hpp"

namespace bitext {

struct Embedding {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  bool operator==(const Embedding&) const = default;
};

// Maps text to fixed-dimension vectors. Implementations must be
// deterministic within a run and safe to call concurrently on disjoint
// batches.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string provider_id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t batch_limit() const = 0;

  // One embedding per text, in order. Callers go through embed_batch, which
  // checks the batch limit and the returned shapes.
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
};

// Throws InvalidInput("batch too large") when texts exceed the provider's
// batch limit and InvalidInput on any returned dimension mismatch.
std::vector<Embedding> embed_batch(std::span<const std::string> texts,
                                   EmbeddingProvider& provider);

// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Symmetric bit-for-bit.
double cosine(const Embedding& a, const Embedding& b);

// Character n-gram hashing embedding used as the built-in provider.
//
// The text is split into Unicode code points. Every trigram (or, for texts
// shorter than three code points, every 1- and 2-gram) is hashed as UTF-8
// bytes with MurmurHash3 x64_128 under kMockSeed; the low 64 bits modulo
// `dim` select a bucket. The bucket counts are L2-normalized.
inline constexpr std::uint32_t kMockSeed = 0x5EED;
inline constexpr std::size_t kMockDim = 256;

Embedding mock_embed(std::string_view text, std::size_t dim = kMockDim);

class MockProvider final : public EmbeddingProvider {
 public:
  explicit MockProvider(std::size_t dim = kMockDim,
                        std::size_t batch_limit = 1024);

  std::string provider_id() const override;
  std::size_t dim() const override { return dim_; }
  std::size_t batch_limit() const override { return batch_limit_; }
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
  std::size_t batch_limit_;
};

// clamp_similarity(cosine(embed(src), embed(tgt))). Both sides are normalized
// and embedded independently in one provider call.
ScoredPair score_pair(const SentencePair& pair, EmbeddingProvider& provider);

// Scores pairs in provider-sized batches, fanning batches out to `jobs`
// worker threads and returning results in input order. A batch that fails
// is retried pair by pair; pairs that still fail come back as nullopt with
// the error message in `errors` at the same index.
struct BatchScores {
  std::vector<std::optional<ScoredPair>> scores;
  std::vector<std::string> errors;
};

BatchScores score_pairs(std::span<const SentencePair> pairs,
                        EmbeddingProvider& provider, unsigned jobs = 1);

struct FilterResult {
  std::vector<ScoredPair> kept;
  std::vector<ScoredPair> rejected;
};

// kept = {similarity >= tau}, rejected = the rest; input order preserved in
// both. When `stats` is given each pair is recorded in it.
FilterResult filter_by_threshold(std::span<const ScoredPair> scored,
                                 SimilarityThreshold tau,
                                 CorpusStats* stats = nullptr);

}  // namespace bitext
