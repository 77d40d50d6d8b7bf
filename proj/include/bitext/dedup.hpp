#pragma once

#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "bitext/corpus.hpp"
#include "bitext/hash.hpp"

namespace bitext {

// 128-bit digest of normalize(source) + 0x1F + normalize(target).
Hash128 pair_fingerprint(const SentencePair& pair);

// Streaming exact-duplicate filter. The first occurrence of each normalized
// (source, target) combination is admitted; later ones are dropped. Pairs that
// share one side but differ on the other are all admitted.
class Deduplicator {
 public:
  // True if the pair is new and should be emitted.
  bool admit(const SentencePair& pair);

  std::uint64_t seen() const noexcept { return seen_; }
  std::uint64_t duplicates_removed() const noexcept { return removed_; }

 private:
  std::unordered_set<Hash128, Hash128Hasher> fingerprints_;
  std::uint64_t seen_ = 0;
  std::uint64_t removed_ = 0;
};

struct DedupResult {
  std::vector<SentencePair> kept;
  std::uint64_t duplicates_removed = 0;
};

// Emits the original (not normalized) text of kept pairs, in input order.
DedupResult dedup_exact(std::span<const SentencePair> pairs);

}  // namespace bitext
