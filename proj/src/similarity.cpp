#include "bitext/similarity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <unicode/utf8.h>

#include "bitext/error.hpp"
#include "bitext/hash.hpp"
#include "bitext/ingest.hpp"

namespace bitext {

std::vector<Embedding> embed_batch(std::span<const std::string> texts,
                                   EmbeddingProvider& provider) {
  if (texts.size() > provider.batch_limit()) {
    throw InvalidInput("batch too large");
  }
  if (texts.empty()) return {};
  std::vector<Embedding> out = provider.embed(texts);
  if (out.size() != texts.size()) {
    throw InvalidInput("provider " + provider.provider_id() + " returned " +
                       std::to_string(out.size()) + " embeddings for " +
                       std::to_string(texts.size()) + " texts");
  }
  for (const auto& e : out) {
    if (e.dim() != provider.dim()) {
      throw InvalidInput("dimension mismatch: provider " +
                         provider.provider_id() + " declared " +
                         std::to_string(provider.dim()) + ", returned " +
                         std::to_string(e.dim()));
    }
  }
  return out;
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) throw InvalidInput("dimension mismatch");
  double dot = 0.0;
  double norm_a = 0.0;
  double norm_b = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    norm_a += a.values[i] * a.values[i];
    norm_b += b.values[i] * b.values[i];
  }
  if (norm_a == 0.0 || norm_b == 0.0) {
    throw InvalidInput("undefined similarity");
  }
  // sqrt(x * x) == x exactly, so identical vectors give exactly 1.
  const double c = dot / std::sqrt(norm_a * norm_b);
  if (!std::isfinite(c)) throw InvalidInput("undefined similarity");
  return std::clamp(c, -1.0, 1.0);
}

Embedding mock_embed(std::string_view text, std::size_t dim) {
  if (dim == 0) throw InvalidInput("embedding dimension must be positive");

  // Byte offset of each code point, plus the end offset.
  std::vector<std::size_t> offsets;
  offsets.reserve(text.size() + 1);
  {
    const auto* s = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < length) {
      offsets.push_back(static_cast<std::size_t>(i));
      UChar32 c;
      U8_NEXT(s, i, length, c);
    }
    offsets.push_back(text.size());
  }
  const std::size_t n_chars = offsets.size() - 1;

  Embedding e;
  e.values.assign(dim, 0.0);
  const auto add_gram = [&](std::size_t begin, std::size_t n) {
    const std::string_view gram =
        text.substr(offsets[begin], offsets[begin + n] - offsets[begin]);
    e.values[murmur3_128(gram, kMockSeed).low % dim] += 1.0;
  };
  if (n_chars >= 3) {
    for (std::size_t i = 0; i + 3 <= n_chars; ++i) add_gram(i, 3);
  } else {
    for (std::size_t n = 1; n <= 2; ++n) {
      for (std::size_t i = 0; i + n <= n_chars; ++i) add_gram(i, n);
    }
  }

  double norm = 0.0;
  for (double v : e.values) norm += v * v;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : e.values) v /= norm;
  }
  return e;
}

MockProvider::MockProvider(std::size_t dim, std::size_t batch_limit)
    : dim_(dim), batch_limit_(batch_limit) {
  if (dim_ == 0 || batch_limit_ == 0) {
    throw InvalidInput("mock provider needs positive dim and batch limit");
  }
}

std::string MockProvider::provider_id() const {
  return "mock-trigram-v1/dim=" + std::to_string(dim_);
}

std::vector<Embedding> MockProvider::embed(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(mock_embed(t, dim_));
  return out;
}

ScoredPair score_pair(const SentencePair& pair, EmbeddingProvider& provider) {
  const std::string texts[] = {normalize(pair.source_text),
                               normalize(pair.target_text)};
  const auto embeddings = embed_batch(texts, provider);
  return ScoredPair(pair, cosine(embeddings[0], embeddings[1]),
                    provider.provider_id());
}

namespace {

// Scores pairs [begin, end) with a single provider call (2 texts per pair).
void score_range(std::span<const SentencePair> pairs, std::size_t begin,
                 std::size_t end, EmbeddingProvider& provider,
                 const std::string& scorer_id, BatchScores& out) {
  try {
    std::vector<std::string> texts;
    texts.reserve(2 * (end - begin));
    for (std::size_t i = begin; i < end; ++i) {
      texts.push_back(normalize(pairs[i].source_text));
      texts.push_back(normalize(pairs[i].target_text));
    }
    const auto embeddings = embed_batch(texts, provider);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t k = 2 * (i - begin);
      out.scores[i].emplace(pairs[i], cosine(embeddings[k], embeddings[k + 1]),
                            scorer_id);
    }
    return;
  } catch (const Error& e) {
    if (end - begin == 1) {
      out.errors[begin] = e.what();
      return;
    }
  }
  // Isolate the failing pairs.
  for (std::size_t i = begin; i < end; ++i) {
    score_range(pairs, i, i + 1, provider, scorer_id, out);
  }
}

}  // namespace

BatchScores score_pairs(std::span<const SentencePair> pairs,
                        EmbeddingProvider& provider, unsigned jobs) {
  BatchScores out;
  out.scores.resize(pairs.size());
  out.errors.resize(pairs.size());
  if (pairs.empty()) return out;

  const std::size_t per_batch = std::max<std::size_t>(1, provider.batch_limit() / 2);
  const std::size_t n_batches = (pairs.size() + per_batch - 1) / per_batch;
  const std::string scorer_id = provider.provider_id();

  std::atomic<std::size_t> next_batch{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (;;) {
      const std::size_t b = next_batch.fetch_add(1);
      if (b >= n_batches) return;
      const std::size_t begin = b * per_batch;
      const std::size_t end = std::min(pairs.size(), begin + per_batch);
      try {
        score_range(pairs, begin, end, provider, scorer_id, out);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next_batch = n_batches;
      }
    }
  };

  const unsigned n_threads = static_cast<unsigned>(
      std::min<std::size_t>(std::max(1u, jobs), n_batches));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

FilterResult filter_by_threshold(std::span<const ScoredPair> scored,
                                 SimilarityThreshold tau, CorpusStats* stats) {
  FilterResult result;
  for (const auto& p : scored) {
    const bool keep = tau.keeps(p.similarity());
    if (stats) stats->record_score(p.similarity(), keep);
    (keep ? result.kept : result.rejected).push_back(p);
  }
  return result;
}

}  // namespace bitext
