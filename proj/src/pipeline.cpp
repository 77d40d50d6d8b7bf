#include "bitext/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "bitext/dedup.hpp"
#include "bitext/error.hpp"
#include "bitext/remote_provider.hpp"
#include "bitext/score_cache.hpp"

namespace bitext {

namespace {

// Stages emit the original text; normalization only feeds fingerprints and
// embeddings.
const ReaderOptions kRawText{.normalize_text = false, .corpus_name = {}};

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw InvalidInput("config key '" + key + "': not a number: " + value);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("config key '" + key + "': not a number: " + value);
  }
}

void write_json_file(const std::filesystem::path& path,
                     const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

nlohmann::ordered_json config_json(const PipelineConfig& c,
                                   CorpusFormat input_format) {
  nlohmann::ordered_json j;
  j["input"] = c.input_path.string();
  j["input_format"] = input_format == CorpusFormat::kTsv ? "tsv" : "jsonl";
  j["kept"] = c.output_kept_path.string();
  j["rejected"] = c.output_rejected_path.string();
  j["unscored"] = c.unscored_path.string();
  j["stats"] = c.stats_path.string();
  j["manifest"] = c.manifest_path.string();
  j["tau"] = c.tau.value();
  j["provider"] = c.provider.kind == ProviderConfig::Kind::kMock ? "mock" : "remote";
  if (c.provider.kind == ProviderConfig::Kind::kRemote) {
    j["provider_url"] = c.provider.url;
    j["batch"] = c.provider.batch;
  }
  j["dim"] = c.provider.dim;
  j["cache"] = c.cache_path.string();
  j["jobs"] = c.jobs;
  j["in_flight"] = c.in_flight;
  return j;
}

CorpusFormat resolve_format(const std::optional<CorpusFormat>& format,
                            const std::filesystem::path& path) {
  if (format) return *format;
  if (auto f = format_from_path(path)) return *f;
  throw InvalidInput("cannot infer corpus format of " + path.string() +
                     "; pass input_format");
}

std::string percent(std::uint64_t part, std::uint64_t whole) {
  if (whole == 0) return "0.0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f",
                100.0 * static_cast<double>(part) / static_cast<double>(whole));
  return buf;
}

}  // namespace

std::unique_ptr<EmbeddingProvider> make_provider(
    const ProviderConfig& config, const std::filesystem::path& cache_path) {
  std::unique_ptr<EmbeddingProvider> provider;
  if (config.kind == ProviderConfig::Kind::kMock) {
    provider = std::make_unique<MockProvider>(config.dim);
  } else {
    RemoteProviderOptions options;
    options.url = config.url;
    options.dim = config.dim;
    options.batch_limit = config.batch;
    provider = std::make_unique<RemoteProvider>(std::move(options));
  }
  if (!cache_path.empty()) {
    provider = std::make_unique<CachingProvider>(std::move(provider), cache_path);
  }
  return provider;
}

void PipelineConfig::validate() const {
  const std::pair<const char*, const std::filesystem::path*> required[] = {
      {"input", &input_path},         {"kept", &output_kept_path},
      {"rejected", &output_rejected_path}, {"stats", &stats_path},
      {"manifest", &manifest_path},
  };
  for (const auto& [name, path] : required) {
    if (path->empty()) throw InvalidInput(std::string("missing required key: ") + name);
  }
  std::set<std::filesystem::path> seen;
  const std::filesystem::path* all[] = {&input_path,   &output_kept_path,
                                        &output_rejected_path, &unscored_path,
                                        &stats_path,   &manifest_path,
                                        &cache_path};
  for (const auto* p : all) {
    if (p->empty()) continue;
    if (!seen.insert(p->lexically_normal()).second) {
      throw InvalidInput("pipeline paths must be distinct: " + p->string());
    }
  }
  if (provider.kind == ProviderConfig::Kind::kRemote && provider.url.empty()) {
    throw InvalidInput("remote provider needs provider_url");
  }
  if (provider.dim == 0 || provider.batch == 0) {
    throw InvalidInput("provider dim and batch must be positive");
  }
  if (jobs == 0 || in_flight == 0) {
    throw InvalidInput("jobs and in_flight must be positive");
  }
}

ConfigMap parse_config_text(std::string_view text) {
  ConfigMap values;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput("config line " + std::to_string(line_no) +
                         ": expected key = value");
    }
    values[trim(std::string_view(t).substr(0, eq))] =
        trim(std::string_view(t).substr(eq + 1));
  }
  return values;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_config(const ConfigMap& values, PipelineConfig& c) {
  for (const auto& [key, value] : values) {
    if (key == "input") {
      c.input_path = value;
    } else if (key == "input_format") {
      c.input_format = parse_format(value);
      if (!c.input_format) throw InvalidInput("unknown input_format: " + value);
    } else if (key == "kept") {
      c.output_kept_path = value;
    } else if (key == "rejected") {
      c.output_rejected_path = value;
    } else if (key == "unscored") {
      c.unscored_path = value;
    } else if (key == "stats") {
      c.stats_path = value;
    } else if (key == "manifest") {
      c.manifest_path = value;
    } else if (key == "tau") {
      c.tau = SimilarityThreshold(parse_double(key, value));
    } else if (key == "provider") {
      if (value == "mock") {
        c.provider.kind = ProviderConfig::Kind::kMock;
      } else if (value == "remote") {
        c.provider.kind = ProviderConfig::Kind::kRemote;
      } else {
        throw InvalidInput("unknown provider: " + value);
      }
    } else if (key == "provider_url") {
      c.provider.url = value;
    } else if (key == "batch") {
      c.provider.batch = parse_number<std::size_t>(key, value);
    } else if (key == "dim") {
      c.provider.dim = parse_number<std::size_t>(key, value);
    } else if (key == "cache") {
      c.cache_path = value;
    } else if (key == "jobs") {
      c.jobs = parse_number<unsigned>(key, value);
    } else if (key == "in_flight") {
      c.in_flight = parse_number<std::size_t>(key, value);
    } else {
      throw InvalidInput("unknown config key: " + key);
    }
  }
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kInternal, "SHA-256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) {
      EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

CorpusStats run_pipeline(const PipelineConfig& config) {
  config.validate();
  const CorpusFormat input_format =
      resolve_format(config.input_format, config.input_path);

  nlohmann::ordered_json manifest;
  manifest["status"] = "running";
  manifest["config"] = config_json(config, input_format);

  const auto remove_outputs = [&] {
    std::error_code ec;
    for (const auto* p : {&config.output_kept_path, &config.output_rejected_path,
                          &config.unscored_path, &config.stats_path}) {
      if (!p->empty()) std::filesystem::remove(*p, ec);
    }
  };

  try {
    auto provider = make_provider(config.provider, config.cache_path);
    manifest["provider_id"] = provider->provider_id();
    manifest["input_digest"] = {{"sha256", sha256_file(config.input_path)}};

    PairReader reader(config.input_path, input_format, kRawText);
    PairWriter kept(config.output_kept_path, CorpusFormat::kJsonl);
    PairWriter rejected(config.output_rejected_path, CorpusFormat::kJsonl);
    std::optional<PairWriter> unscored;
    if (!config.unscored_path.empty()) {
      unscored.emplace(config.unscored_path, CorpusFormat::kJsonl);
    }

    CorpusStats stats;
    Deduplicator dedup;
    std::vector<SentencePair> chunk;
    chunk.reserve(config.in_flight);

    const auto flush = [&] {
      if (chunk.empty()) return;
      const BatchScores scores = score_pairs(chunk, *provider, config.jobs);
      for (std::size_t i = 0; i < chunk.size(); ++i) {
        if (const auto& s = scores.scores[i]) {
          const bool keep = config.tau.keeps(s->similarity());
          stats.record_score(s->similarity(), keep);
          (keep ? kept : rejected).write(to_record(*s));
        } else {
          if (!unscored) {
            throw ProviderError("pair " + chunk[i].id +
                                " could not be scored and no unscored sidecar "
                                "is configured: " + scores.errors[i]);
          }
          ++stats.unscored;
          CorpusRecord record{chunk[i], std::nullopt, std::nullopt};
          record.pair.meta["unscored_reason"] = scores.errors[i];
          unscored->write(record);
        }
      }
      chunk.clear();
    };

    while (auto record = reader.next()) {
      ++stats.total_read;
      if (!dedup.admit(record->pair)) continue;
      chunk.push_back(std::move(record->pair));
      if (chunk.size() >= config.in_flight) flush();
    }
    flush();
    stats.duplicates_removed = dedup.duplicates_removed();
    stats.malformed_skipped = reader.skipped();

    kept.close();
    rejected.close();
    if (unscored) unscored->close();
    write_json_file(config.stats_path, to_json(stats));

    manifest["status"] = "complete";
    manifest["stats"] = to_json(stats);
    write_json_file(config.manifest_path, manifest);
    spdlog::info("pipeline: read {}, duplicates {}, scored {}, retained {}, rejected {}",
                 stats.total_read, stats.duplicates_removed, stats.scored,
                 stats.retained, stats.rejected);
    return stats;
  } catch (const std::exception& e) {
    remove_outputs();
    manifest["status"] = "incomplete";
    manifest["error"] = e.what();
    try {
      write_json_file(config.manifest_path, manifest);
    } catch (const std::exception& manifest_error) {
      spdlog::error("could not write manifest: {}", manifest_error.what());
    }
    throw;
  }
}

StageCounts run_dedup_stage(const std::filesystem::path& in, CorpusFormat in_format,
                            const std::filesystem::path& out,
                            CorpusFormat out_format) {
  PairReader reader(in, in_format, kRawText);
  PairWriter writer(out, out_format);
  Deduplicator dedup;
  StageCounts counts;
  while (auto record = reader.next()) {
    ++counts.read;
    if (dedup.admit(record->pair)) writer.write(record->pair);
  }
  writer.close();
  counts.written = writer.count();
  counts.dropped = dedup.duplicates_removed();
  counts.malformed = reader.skipped();
  return counts;
}

StageCounts run_score_stage(const std::filesystem::path& in, CorpusFormat in_format,
                            const std::filesystem::path& out,
                            const std::filesystem::path& unscored_path,
                            EmbeddingProvider& provider, unsigned jobs,
                            std::size_t in_flight) {
  PairReader reader(in, in_format, kRawText);
  PairWriter writer(out, CorpusFormat::kJsonl);
  std::optional<PairWriter> unscored;
  if (!unscored_path.empty()) unscored.emplace(unscored_path, CorpusFormat::kJsonl);

  StageCounts counts;
  std::vector<SentencePair> chunk;
  const auto flush = [&] {
    const BatchScores scores = score_pairs(chunk, provider, jobs);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      if (const auto& s = scores.scores[i]) {
        writer.write(to_record(*s));
        continue;
      }
      if (!unscored) {
        throw ProviderError("pair " + chunk[i].id + " could not be scored: " +
                            scores.errors[i]);
      }
      ++counts.dropped;
      CorpusRecord record{chunk[i], std::nullopt, std::nullopt};
      record.pair.meta["unscored_reason"] = scores.errors[i];
      unscored->write(record);
    }
    chunk.clear();
  };
  while (auto record = reader.next()) {
    ++counts.read;
    chunk.push_back(std::move(record->pair));
    if (chunk.size() >= in_flight) flush();
  }
  flush();
  writer.close();
  if (unscored) unscored->close();
  counts.written = writer.count();
  counts.malformed = reader.skipped();
  return counts;
}

CorpusStats run_filter_stage(const std::filesystem::path& scored_in,
                             SimilarityThreshold tau,
                             const std::filesystem::path& kept_path,
                             const std::filesystem::path& rejected_path) {
  PairReader reader(scored_in, CorpusFormat::kJsonl, kRawText);
  PairWriter kept(kept_path, CorpusFormat::kJsonl);
  PairWriter rejected(rejected_path, CorpusFormat::kJsonl);
  CorpusStats stats;
  while (auto record = reader.next()) {
    ++stats.total_read;
    if (!record->score) {
      throw InvalidInput("record " + record->pair.id +
                         " has no \"score\"; run the score stage first");
    }
    const ScoredPair scored(std::move(record->pair), *record->score,
                            record->scorer.value_or(""));
    const bool keep = tau.keeps(scored.similarity());
    stats.record_score(scored.similarity(), keep);
    (keep ? kept : rejected).write(to_record(scored));
  }
  kept.close();
  rejected.close();
  stats.malformed_skipped = reader.skipped();
  return stats;
}

Report report(const CorpusStats& stats) {
  Report r;
  const std::string dup_pct = percent(stats.duplicates_removed, stats.total_read);
  const std::string kept_pct = percent(stats.retained, stats.scored);
  const std::string rej_pct = percent(stats.rejected, stats.scored);

  r.json = to_json(stats);
  r.json["duplicates_removed_pct"] = std::stod(dup_pct);
  r.json["retained_pct"] = std::stod(kept_pct);
  r.json["rejected_pct"] = std::stod(rej_pct);

  std::ostringstream out;
  out << "total read:          " << stats.total_read << '\n'
      << "duplicates removed:  " << stats.duplicates_removed << " (" << dup_pct
      << "% of read)\n"
      << "malformed skipped:   " << stats.malformed_skipped << '\n'
      << "unscored:            " << stats.unscored << '\n'
      << "scored:              " << stats.scored << '\n';
  if (stats.scored == 0) {
    out << "no pairs scored\n";
    r.text = out.str();
    return r;
  }
  out << "retained:            " << stats.retained << " (retained " << kept_pct
      << "%)\n"
      << "rejected:            " << stats.rejected << " (rejected " << rej_pct
      << "%)\n"
      << "score histogram:\n";

  std::uint64_t peak = 1;
  for (auto c : stats.score_histogram) peak = std::max(peak, c);
  for (std::size_t i = 0; i < CorpusStats::kBins; ++i) {
    char label[32];
    std::snprintf(label, sizeof label, "  [%.2f, %.2f%c ", i * 0.05, (i + 1) * 0.05,
                  i + 1 == CorpusStats::kBins ? ']' : ')');
    const auto bar = static_cast<std::size_t>(
        std::lround(40.0 * static_cast<double>(stats.score_histogram[i]) /
                    static_cast<double>(peak)));
    out << label << stats.score_histogram[i] << ' ' << std::string(bar, '#')
        << '\n';
  }
  r.text = out.str();
  return r;
}

}  // namespace bitext
