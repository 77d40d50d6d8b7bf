#include "bitext/corpus.hpp"

#include <algorithm>
#include <cmath>

#include "bitext/error.hpp"

namespace bitext {

double clamp_similarity(double x) {
  if (!std::isfinite(x)) throw InvalidInput("invalid score");
  return std::clamp(x, 0.0, 1.0);
}

ScoredPair::ScoredPair(SentencePair pair, double raw_similarity,
                       std::string scorer_id)
    : pair_(std::move(pair)),
      similarity_(clamp_similarity(raw_similarity)),
      scorer_id_(std::move(scorer_id)) {}

SimilarityThreshold::SimilarityThreshold(double tau) : tau_(tau) {
  if (!std::isfinite(tau) || tau < 0.0 || tau > 1.0) {
    throw InvalidInput("threshold must lie in [0, 1]");
  }
}

namespace {

constexpr std::array<std::string_view, 6> kLabelNames = {
    "NuanceLoss",     "DifferentMeaning",
    "Ambiguous",      "MissingContext",
    "SimilarContextDistinctMeaning", "Accurate",
};

}  // namespace

std::string_view to_string(DiscrepancyLabel label) {
  return kLabelNames[static_cast<std::size_t>(label)];
}

std::optional<DiscrepancyLabel> parse_label(std::string_view name) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == name) return kAllLabels[i];
  }
  return std::nullopt;
}

std::size_t CorpusStats::bin_of(double similarity) {
  const auto bin = static_cast<std::size_t>(
      std::floor(std::clamp(similarity, 0.0, 1.0) * static_cast<double>(kBins)));
  return std::min(bin, kBins - 1);
}

void CorpusStats::record_score(double similarity, bool kept) {
  ++scored;
  ++score_histogram[bin_of(similarity)];
  if (kept) {
    ++retained;
  } else {
    ++rejected;
  }
}

nlohmann::ordered_json to_json(const CorpusStats& stats) {
  nlohmann::ordered_json j;
  j["total_read"] = stats.total_read;
  j["duplicates_removed"] = stats.duplicates_removed;
  j["scored"] = stats.scored;
  j["retained"] = stats.retained;
  j["rejected"] = stats.rejected;
  j["unscored"] = stats.unscored;
  j["malformed_skipped"] = stats.malformed_skipped;
  j["score_histogram"] = stats.score_histogram;
  return j;
}

CorpusStats stats_from_json(const nlohmann::json& j) {
  try {
    CorpusStats s;
    s.total_read = j.at("total_read").get<std::uint64_t>();
    s.duplicates_removed = j.at("duplicates_removed").get<std::uint64_t>();
    s.scored = j.at("scored").get<std::uint64_t>();
    s.retained = j.at("retained").get<std::uint64_t>();
    s.rejected = j.at("rejected").get<std::uint64_t>();
    s.unscored = j.value("unscored", std::uint64_t{0});
    s.malformed_skipped = j.value("malformed_skipped", std::uint64_t{0});
    const auto& hist = j.at("score_histogram");
    if (!hist.is_array() || hist.size() != CorpusStats::kBins) {
      throw InvalidInput("score_histogram must have 20 bins");
    }
    for (std::size_t i = 0; i < CorpusStats::kBins; ++i) {
      s.score_histogram[i] = hist[i].get<std::uint64_t>();
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed stats: ") + e.what());
  }
}

CorpusRecord to_record(const ScoredPair& scored) {
  return CorpusRecord{scored.pair(), scored.similarity(), scored.scorer_id()};
}

std::string serialize_record(const CorpusRecord& record) {
  nlohmann::ordered_json j;
  if (!record.pair.id.empty()) j["id"] = record.pair.id;
  j["src"] = record.pair.source_text;
  j["tgt"] = record.pair.target_text;
  if (!record.pair.meta.empty()) j["meta"] = record.pair.meta;
  if (record.score) j["score"] = *record.score;
  if (record.scorer) j["scorer"] = *record.scorer;
  return j.dump();
}

CorpusRecord deserialize_record(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw InvalidInput("not a JSON object");
  }
  const auto src = j.find("src");
  const auto tgt = j.find("tgt");
  if (src == j.end() || !src->is_string() || tgt == j.end() ||
      !tgt->is_string()) {
    throw InvalidInput("missing string fields \"src\"/\"tgt\"");
  }
  CorpusRecord record;
  record.pair.source_text = src->get<std::string>();
  record.pair.target_text = tgt->get<std::string>();
  if (const auto id = j.find("id"); id != j.end()) {
    if (!id->is_string()) throw InvalidInput("\"id\" must be a string");
    record.pair.id = id->get<std::string>();
  }
  if (const auto meta = j.find("meta"); meta != j.end()) {
    if (!meta->is_object()) throw InvalidInput("\"meta\" must be an object");
    for (const auto& [key, value] : meta->items()) {
      if (!value.is_string()) {
        throw InvalidInput("\"meta\" values must be strings");
      }
      record.pair.meta.emplace(key, value.get<std::string>());
    }
  }
  if (const auto score = j.find("score"); score != j.end()) {
    if (!score->is_number()) throw InvalidInput("\"score\" must be a number");
    record.score = score->get<double>();
  }
  if (const auto scorer = j.find("scorer"); scorer != j.end()) {
    if (!scorer->is_string()) throw InvalidInput("\"scorer\" must be a string");
    record.scorer = scorer->get<std::string>();
  }
  return record;
}

}  // namespace bitext
