#include "bitext/remote_provider.hpp"

#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "bitext/error.hpp"

namespace bitext {

namespace {

// Splits "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw InvalidInput("provider URL needs a scheme: " + url);
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

}  // namespace

RemoteProvider::RemoteProvider(RemoteProviderOptions options)
    : options_(std::move(options)) {
  if (options_.url.empty()) throw InvalidInput("remote provider needs a URL");
  if (options_.dim == 0) throw InvalidInput("remote provider needs dim > 0");
  if (options_.batch_limit == 0) {
    throw InvalidInput("remote provider needs batch limit > 0");
  }
  std::tie(scheme_host_port_, path_) = split_url(options_.url);
}

std::string RemoteProvider::provider_id() const {
  return "remote:" + options_.url + "/dim=" + std::to_string(options_.dim);
}

std::vector<Embedding> RemoteProvider::embed(
    std::span<const std::string> texts) {
  const std::string body =
      nlohmann::json{{"texts", std::vector<std::string>(texts.begin(), texts.end())}}
          .dump();

  std::string last_error;
  auto backoff = options_.initial_backoff;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      spdlog::warn("embedding request failed ({}); retry {}/{} in {} ms",
                   last_error, attempt, options_.max_retries, backoff.count());
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    const auto res = client.Post(path_, body, "application/json");
    if (!res) {
      last_error = "connection error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ProviderError("embedding service rejected request: HTTP " +
                          std::to_string(res->status));
    }

    const auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("embeddings") ||
        !j["embeddings"].is_array()) {
      throw ProviderError("malformed embedding response");
    }
    std::vector<Embedding> out;
    out.reserve(j["embeddings"].size());
    for (const auto& row : j["embeddings"]) {
      if (!row.is_array()) throw ProviderError("malformed embedding row");
      Embedding e;
      e.values.reserve(row.size());
      for (const auto& v : row) {
        if (!v.is_number()) throw ProviderError("non-numeric embedding value");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ProviderError("non-finite embedding value");
        e.values.push_back(x);
      }
      out.push_back(std::move(e));
    }
    return out;
  }
  throw ProviderError("embedding service unavailable after " +
                      std::to_string(options_.max_retries) +
                      " retries: " + last_error);
}

}  // namespace bitext
