#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace bitext {

// One aligned source/target sentence pair.
struct SentencePair {
  std::string id;
  std::string source_text;
  std::string target_text;
  std::map<std::string, std::string> meta;

  bool operator==(const SentencePair&) const = default;
};

// Returns min(1, max(0, x)); throws InvalidInput("invalid score") for NaN/inf.
double clamp_similarity(double x);

// A pair annotated with a similarity in [0, 1]. The score is clamped on
// construction, so no ScoredPair can hold an out-of-range value.
class ScoredPair {
 public:
  ScoredPair(SentencePair pair, double raw_similarity, std::string scorer_id);

  const SentencePair& pair() const noexcept { return pair_; }
  double similarity() const noexcept { return similarity_; }
  const std::string& scorer_id() const noexcept { return scorer_id_; }

  bool operator==(const ScoredPair&) const = default;

 private:
  SentencePair pair_;
  double similarity_;
  std::string scorer_id_;
};

class SimilarityThreshold {
 public:
  static constexpr double kDefault = 0.7;

  SimilarityThreshold() = default;
  explicit SimilarityThreshold(double tau);

  double value() const noexcept { return tau_; }
  bool keeps(double similarity) const noexcept { return similarity >= tau_; }

 private:
  double tau_ = kDefault;
};

enum class DiscrepancyLabel {
  kNuanceLoss,
  kDifferentMeaning,
  kAmbiguous,
  kMissingContext,
  kSimilarContextDistinctMeaning,
  kAccurate,
};

inline constexpr std::array<DiscrepancyLabel, 6> kAllLabels = {
    DiscrepancyLabel::kNuanceLoss,
    DiscrepancyLabel::kDifferentMeaning,
    DiscrepancyLabel::kAmbiguous,
    DiscrepancyLabel::kMissingContext,
    DiscrepancyLabel::kSimilarContextDistinctMeaning,
    DiscrepancyLabel::kAccurate,
};

std::string_view to_string(DiscrepancyLabel label);
std::optional<DiscrepancyLabel> parse_label(std::string_view name);

// Counters for one filtering run. The histogram has 20 equal-width bins
// over [0, 1]; a score of exactly 1.0 falls into the last bin.
struct CorpusStats {
  static constexpr std::size_t kBins = 20;

  std::uint64_t total_read = 0;
  std::uint64_t duplicates_removed = 0;
  std::uint64_t scored = 0;
  std::uint64_t retained = 0;
  std::uint64_t rejected = 0;
  std::uint64_t unscored = 0;
  std::uint64_t malformed_skipped = 0;
  std::array<std::uint64_t, kBins> score_histogram{};

  static std::size_t bin_of(double similarity);

  // Records one scored pair and whether the threshold kept it.
  void record_score(double similarity, bool kept);

  bool operator==(const CorpusStats&) const = default;
};

nlohmann::ordered_json to_json(const CorpusStats& stats);
CorpusStats stats_from_json(const nlohmann::json& j);

// A corpus record as it travels through files: a pair plus the optional
// score fields emitted by scoring stages.
struct CorpusRecord {
  SentencePair pair;
  std::optional<double> score;
  std::optional<std::string> scorer;

  bool operator==(const CorpusRecord&) const = default;
};

CorpusRecord to_record(const ScoredPair& scored);

// JSONL line encoding (no trailing newline). Field order is fixed:
// id, src, tgt, meta, score, scorer; absent optionals are omitted.
std::string serialize_record(const CorpusRecord& record);
// Throws InvalidInput on malformed lines.
CorpusRecord deserialize_record(std::string_view line);

}  // namespace bitext
