#include "bitext/score_cache.hpp"

#include <mutex>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "bitext/error.hpp"

namespace bitext {

CachingProvider::CachingProvider(std::unique_ptr<EmbeddingProvider> inner,
                                 std::filesystem::path cache_path)
    : inner_(std::move(inner)),
      provider_id_(inner_->provider_id()),
      path_(std::move(cache_path)) {
  if (std::ifstream in(path_); in) {
    std::string line;
    std::size_t ignored = 0;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        ++ignored;
        continue;
      }
      if (j.value("provider", "") != provider_id_) continue;
      try {
        const std::string hex = j.at("key").get<std::string>();
        if (hex.size() != 32) throw InvalidInput("bad key");
        Hash128 key{std::stoull(hex.substr(16), nullptr, 16),
                    std::stoull(hex.substr(0, 16), nullptr, 16)};
        Embedding e{j.at("embedding").get<std::vector<double>>()};
        if (e.dim() != inner_->dim()) {
          ++ignored;
          continue;
        }
        entries_.emplace(key, std::move(e));
      } catch (const std::exception&) {
        ++ignored;
      }
    }
    if (ignored > 0) {
      spdlog::warn("score cache {}: ignored {} unreadable entries",
                   path_.string(), ignored);
    }
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw IoError("cannot open score cache: " + path_.string());
}

Hash128 CachingProvider::key_of(const std::string& text) const {
  std::string key = provider_id_;
  key.push_back('\x1F');
  key += text;
  return murmur3_128(key);
}

std::size_t CachingProvider::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::vector<Embedding> CachingProvider::embed(
    std::span<const std::string> texts) {
  std::vector<Embedding> out(texts.size());
  std::vector<Hash128> keys(texts.size());
  std::vector<std::size_t> missing;
  {
    std::shared_lock lock(mutex_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      keys[i] = key_of(texts[i]);
      if (const auto it = entries_.find(keys[i]); it != entries_.end()) {
        out[i] = it->second;
      } else {
        missing.push_back(i);
      }
    }
  }
  hits_ += texts.size() - missing.size();
  misses_ += missing.size();
  if (missing.empty()) return out;

  std::vector<std::string> to_embed;
  to_embed.reserve(missing.size());
  for (std::size_t i : missing) to_embed.push_back(texts[i]);
  auto fresh = embed_batch(to_embed, *inner_);

  std::unique_lock lock(mutex_);
  for (std::size_t k = 0; k < missing.size(); ++k) {
    const std::size_t i = missing[k];
    if (entries_.emplace(keys[i], fresh[k]).second) {
      nlohmann::json line{{"provider", provider_id_},
                          {"key", keys[i].hex()},
                          {"embedding", fresh[k].values}};
      out_ << line.dump() << '\n';
    }
    out[i] = std::move(fresh[k]);
  }
  out_.flush();
  if (!out_) throw IoError("score cache write failed: " + path_.string());
  return out;
}

}  // namespace bitext
