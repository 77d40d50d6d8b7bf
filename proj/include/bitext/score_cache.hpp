#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <shared_mutex>
#include <unordered_map>

#include "bitext/hash.hpp"
#include "bitext/similarity.hpp"

namespace bitext {

// On-disk embedding cache keyed by (provider_id, text hash), wrapped around
// another provider. Entries for other providers in the same file are ignored.
// File format: one JSON object per line,
//   {"provider": "...", "key": "<32 hex>", "embedding": [...]}
// A truncated final line (interrupted write) is ignored on load.
class CachingProvider final : public EmbeddingProvider {
 public:
  CachingProvider(std::unique_ptr<EmbeddingProvider> inner,
                  std::filesystem::path cache_path);

  std::string provider_id() const override { return inner_->provider_id(); }
  std::size_t dim() const override { return inner_->dim(); }
  std::size_t batch_limit() const override { return inner_->batch_limit(); }
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

  std::size_t size() const;
  std::uint64_t hits() const noexcept { return hits_; }
  std::uint64_t misses() const noexcept { return misses_; }

 private:
  Hash128 key_of(const std::string& text) const;

  std::unique_ptr<EmbeddingProvider> inner_;
  std::string provider_id_;
  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<Hash128, Embedding, Hash128Hasher> entries_;
  std::ofstream out_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

}  // namespace bitext
