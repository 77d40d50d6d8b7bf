#include "bitext/dedup.hpp"

#include "bitext/ingest.hpp"

namespace bitext {

Hash128 pair_fingerprint(const SentencePair& pair) {
  std::string key = normalize(pair.source_text);
  key.push_back('\x1F');
  key += normalize(pair.target_text);
  return murmur3_128(key);
}

bool Deduplicator::admit(const SentencePair& pair) {
  ++seen_;
  if (fingerprints_.insert(pair_fingerprint(pair)).second) return true;
  ++removed_;
  return false;
}

DedupResult dedup_exact(std::span<const SentencePair> pairs) {
  Deduplicator dedup;
  DedupResult result;
  for (const auto& pair : pairs) {
    if (dedup.admit(pair)) result.kept.push_back(pair);
  }
  result.duplicates_removed = dedup.duplicates_removed();
  return result;
}

}  // namespace bitext
