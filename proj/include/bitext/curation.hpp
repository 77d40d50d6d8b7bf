#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "bitext/corpus.hpp"
#include "bitext/ingest.hpp"

namespace bitext {

using Clock = std::chrono::system_clock;
using TimePoint = Clock::time_point;

enum class Verdict { kAccept, kReject, kFlag };

std::string_view to_string(Verdict verdict);
// Case-insensitive.
std::optional<Verdict> parse_verdict(std::string_view name);

// ISO 8601 UTC with millisecond precision, e.g. 2026-10-16T08:30:00.250Z.
std::string format_timestamp(TimePoint t);
TimePoint parse_timestamp(std::string_view text);

struct Decision {
  std::string pair_id;
  Verdict verdict = Verdict::kAccept;
  std::optional<DiscrepancyLabel> label;
  std::string reviewer;
  TimePoint timestamp;
  std::optional<std::string> note;

  // Accurate for an unlabeled Accept, the label otherwise, nullopt for an
  // unlabeled Reject or Flag.
  std::optional<DiscrepancyLabel> effective_label() const;
  bool operator==(const Decision&) const = default;
};

// Throws InvalidInput when an Accept carries a defect label or a required
// field is empty.
void validate(const Decision& d);

std::string serialize_decision(const Decision& d);
Decision parse_decision(std::string_view line);

// Append-only JSONL decision log. Each record is written with a single
// write(2) on an O_APPEND descriptor. Opening the log drops a trailing
// partial line left by an interrupted write.
class DecisionLog {
 public:
  explicit DecisionLog(std::filesystem::path path, bool sync_each = false);
  ~DecisionLog();
  DecisionLog(const DecisionLog&) = delete;
  DecisionLog& operator=(const DecisionLog&) = delete;

  void append(const Decision& d);

  // All complete records in file order. A partial final line is ignored; a
  // malformed complete line is an error.
  static std::vector<Decision> replay(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  bool sync_each_;
};

// Uniform sample without replacement of n records, in a seeded random order.
// Throws InvalidInput when the corpus holds fewer than n pairs.
std::vector<CorpusRecord> sample_candidates(const std::filesystem::path& corpus,
                                            CorpusFormat format, std::size_t n,
                                            std::uint64_t seed);

inline constexpr std::string_view kUnlabeled = "Unlabeled";

struct AssessmentStats {
  // Every DiscrepancyLabel name plus "Unlabeled"; sums to `total`.
  std::map<std::string, std::uint64_t> per_label;
  std::uint64_t total = 0;
  std::uint64_t defects = 0;  // decisions whose effective label is not Accurate
  double defect_rate = 0.0;
};

// Throws InvalidInput for an empty log.
AssessmentStats record_assessment_stats(std::span<const Decision> decisions);

enum class ExportOrder { kDecision, kScore };

struct Lease {
  CorpusRecord item;
  std::string reviewer;
  TimePoint expiry;
};

struct QueueCounts {
  std::uint64_t pending = 0;
  std::uint64_t leased = 0;
  std::uint64_t decided = 0;
};

struct CurationOptions {
  std::chrono::milliseconds lease_window = std::chrono::minutes(10);
  std::function<TimePoint()> now = [] { return Clock::now(); };
  bool sync_each = false;
};

// Review queue backed by a queue file (JSONL corpus records, fixed order) and
// the decision log, which is the source of truth: constructing a store replays
// the log. Leases live in memory only. Mutations are serialized; reads share
// the lock.
class CurationStore {
 public:
  CurationStore(const std::filesystem::path& queue_path,
                const std::filesystem::path& log_path,
                CurationOptions options = {});

  // Lowest-index pair that is Pending or whose lease expired. A reviewer who
  // already holds a live lease gets that pair back with the lease renewed.
  std::optional<Lease> next_pending(const std::string& reviewer);

  // Timestamp is assigned by the store. Throws Error(kNotFound) for an
  // unknown pair, Error(kConflict) if decided or leased by someone else.
  Decision record_decision(Decision d);

  QueueCounts counts() const;
  // Zero decisions yields total 0 and defect_rate 0.
  AssessmentStats assessment() const;
  std::vector<Decision> decisions() const;

  // Accepted pairs in decision order, or by score descending (ties in decision
  // order, unscored last). Throws InvalidInput("empty gold set").
  std::vector<CorpusRecord> export_gold(ExportOrder order,
                                        std::size_t limit) const;

  std::size_t size() const noexcept { return items_.size(); }

 private:
  enum class State { kPending, kLeased, kDecided };
  struct Slot {
    State state = State::kPending;
    std::string reviewer;
    TimePoint expiry;
  };

  void apply(const Decision& d);
  bool available(const Slot& slot, TimePoint now) const;

  CurationOptions options_;
  std::vector<CorpusRecord> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Slot> slots_;
  std::vector<Decision> decisions_;
  std::unique_ptr<DecisionLog> log_;
  mutable std::shared_mutex mutex_;
};

nlohmann::ordered_json to_json(const AssessmentStats& stats);

}  // namespace bitext
