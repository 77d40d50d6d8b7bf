#pragma once

#include <chrono>
#include <string>

#include "bitext/similarity.hpp"

namespace bitext {

struct RemoteProviderOptions {
  std::string url;  // e.g. http://localhost:8000/embed
  std::size_t dim = 0;
  std::size_t batch_limit = 64;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{30};
};

// JSON-over-HTTP client: POST {"texts": [...]} and expect
// {"embeddings": [[...], ...]} back. Connection failures and 5xx responses are
// retried with exponential backoff; 4xx responses fail immediately.
class RemoteProvider final : public EmbeddingProvider {
 public:
  explicit RemoteProvider(RemoteProviderOptions options);

  std::string provider_id() const override;
  std::size_t dim() const override { return options_.dim; }
  std::size_t batch_limit() const override { return options_.batch_limit; }
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

 private:
  RemoteProviderOptions options_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace bitext
