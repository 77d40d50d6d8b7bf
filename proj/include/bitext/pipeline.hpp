#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "bitext/corpus.hpp"
#include "bitext/ingest.hpp"
#include "bitext/similarity.hpp"

namespace bitext {

struct ProviderConfig {
  enum class Kind { kMock, kRemote };

  Kind kind = Kind::kMock;
  std::string url;
  std::size_t batch = 64;
  std::size_t dim = kMockDim;
};

// Builds the configured provider, wrapped in the on-disk cache when
// `cache_path` is non-empty.
std::unique_ptr<EmbeddingProvider> make_provider(
    const ProviderConfig& config, const std::filesystem::path& cache_path = {});

struct PipelineConfig {
  std::filesystem::path input_path;
  std::optional<CorpusFormat> input_format;  // from the extension if unset
  std::filesystem::path output_kept_path;
  std::filesystem::path output_rejected_path;
  std::filesystem::path unscored_path;  // optional sidecar
  std::filesystem::path stats_path;
  std::filesystem::path manifest_path;
  SimilarityThreshold tau;
  ProviderConfig provider;
  std::filesystem::path cache_path;
  unsigned jobs = 1;
  std::size_t in_flight = 10'000;

  // Throws InvalidInput for missing or clashing paths.
  void validate() const;
};

using ConfigMap = std::map<std::string, std::string>;

// Parses "key = value" lines; blank lines and lines starting with '#' are
// ignored. Unknown keys are rejected by apply_config, not here.
ConfigMap parse_config_text(std::string_view text);
ConfigMap read_config_file(const std::filesystem::path& path);

// Keys: input, input_format, kept, rejected, unscored, stats, manifest, tau,
// provider (mock|remote), provider_url, batch, dim, cache, jobs, in_flight.
void apply_config(const ConfigMap& values, PipelineConfig& config);

// ingest -> dedup -> score -> filter -> emit, streaming in chunks of at most
// `in_flight` pairs. Writes kept/rejected JSONL with scores, the stats JSON and
// the run manifest. With the mock provider the outputs are byte-reproducible.
// On failure the data outputs are removed and the manifest is written with
// status "incomplete".
CorpusStats run_pipeline(const PipelineConfig& config);

// Individual stages, composable into the same result as run_pipeline.
struct StageCounts {
  std::uint64_t read = 0;
  std::uint64_t written = 0;
  std::uint64_t dropped = 0;
  std::uint64_t malformed = 0;
};

StageCounts run_dedup_stage(const std::filesystem::path& in, CorpusFormat in_format,
                            const std::filesystem::path& out, CorpusFormat out_format);

StageCounts run_score_stage(const std::filesystem::path& in, CorpusFormat in_format,
                            const std::filesystem::path& out,
                            const std::filesystem::path& unscored,
                            EmbeddingProvider& provider, unsigned jobs = 1,
                            std::size_t in_flight = 10'000);

CorpusStats run_filter_stage(const std::filesystem::path& scored_in,
                             SimilarityThreshold tau,
                             const std::filesystem::path& kept,
                             const std::filesystem::path& rejected);

struct Report {
  std::string text;
  nlohmann::ordered_json json;
};

// Totals, removal and retention percentages (one decimal, identical in text
// and JSON) and the 20-bin histogram.
Report report(const CorpusStats& stats);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace bitext
