#include "bitext/curation.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>

#include <spdlog/spdlog.h>

#include "bitext/error.hpp"

namespace bitext {

namespace {

constexpr std::array<std::string_view, 3> kVerdictNames = {"Accept", "Reject",
                                                           "Flag"};

// Unbiased integer in [0, bound) independent of the standard library's
// distribution implementation, so samples reproduce across platforms.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    const std::uint64_t x = rng();
    if (x < limit) return x % bound;
  }
}

std::string errno_message(const std::string& what) {
  return what + ": " + std::strerror(errno);
}

}  // namespace

std::string_view to_string(Verdict verdict) {
  return kVerdictNames[static_cast<std::size_t>(verdict)];
}

std::optional<Verdict> parse_verdict(std::string_view name) {
  for (std::size_t i = 0; i < kVerdictNames.size(); ++i) {
    const auto& candidate = kVerdictNames[i];
    if (candidate.size() == name.size() &&
        std::equal(name.begin(), name.end(), candidate.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) ==
                 std::tolower(static_cast<unsigned char>(b));
        })) {
      return static_cast<Verdict>(i);
    }
  }
  return std::nullopt;
}

std::string format_timestamp(TimePoint t) {
  const auto ms = std::chrono::time_point_cast<std::chrono::milliseconds>(t);
  auto secs = std::chrono::floor<std::chrono::seconds>(ms);
  const auto millis = (ms - secs).count();
  const std::time_t tt = Clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(millis));
  return buf;
}

TimePoint parse_timestamp(std::string_view text) {
  std::tm tm{};
  int millis = 0;
  int consumed = 0;
  const std::string s(text);
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ%n", &tm.tm_year,
                  &tm.tm_mon, &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec,
                  &millis, &consumed) != 7 ||
      static_cast<std::size_t>(consumed) != s.size()) {
    throw InvalidInput("bad timestamp: " + s);
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  const std::time_t tt = timegm(&tm);
  return Clock::from_time_t(tt) + std::chrono::milliseconds(millis);
}

std::optional<DiscrepancyLabel> Decision::effective_label() const {
  if (label) return label;
  if (verdict == Verdict::kAccept) return DiscrepancyLabel::kAccurate;
  return std::nullopt;
}

void validate(const Decision& d) {
  if (d.pair_id.empty()) throw InvalidInput("decision needs a pair_id");
  if (d.reviewer.empty()) throw InvalidInput("decision needs a reviewer");
  if (d.verdict == Verdict::kAccept && d.label &&
      *d.label != DiscrepancyLabel::kAccurate) {
    throw InvalidInput("an Accept decision cannot carry a defect label");
  }
}

std::string serialize_decision(const Decision& d) {
  nlohmann::ordered_json j;
  j["pair_id"] = d.pair_id;
  j["verdict"] = to_string(d.verdict);
  if (d.label) j["label"] = to_string(*d.label);
  j["reviewer"] = d.reviewer;
  j["timestamp"] = format_timestamp(d.timestamp);
  if (d.note) j["note"] = *d.note;
  return j.dump();
}

Decision parse_decision(std::string_view line) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InvalidInput("not a JSON object");
  try {
    Decision d;
    d.pair_id = j.at("pair_id").get<std::string>();
    const auto verdict = parse_verdict(j.at("verdict").get<std::string>());
    if (!verdict) throw InvalidInput("unknown verdict");
    d.verdict = *verdict;
    if (j.contains("label") && !j["label"].is_null()) {
      d.label = parse_label(j["label"].get<std::string>());
      if (!d.label) throw InvalidInput("unknown label");
    }
    d.reviewer = j.at("reviewer").get<std::string>();
    d.timestamp = parse_timestamp(j.at("timestamp").get<std::string>());
    if (j.contains("note") && !j["note"].is_null()) {
      d.note = j["note"].get<std::string>();
    }
    validate(d);
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed decision: ") + e.what());
  }
}

DecisionLog::DecisionLog(std::filesystem::path path, bool sync_each)
    : path_(std::move(path)), sync_each_(sync_each) {
  fd_ = ::open(path_.c_str(), O_RDWR | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError(errno_message("cannot open decision log " + path_.string()));

  // Drop a partial final record so the next append starts on a fresh line.
  struct stat st {};
  if (::fstat(fd_, &st) == 0 && st.st_size > 0) {
    std::ifstream in(path_, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), {});
    if (!content.empty() && content.back() != '\n') {
      const auto last_newline = content.rfind('\n');
      const off_t keep =
          last_newline == std::string::npos ? 0 : static_cast<off_t>(last_newline + 1);
      spdlog::warn("decision log {}: dropping {} bytes of partial record",
                   path_.string(), content.size() - static_cast<std::size_t>(keep));
      if (::ftruncate(fd_, keep) != 0) {
        throw IoError(errno_message("cannot truncate decision log"));
      }
    }
  }
}

DecisionLog::~DecisionLog() {
  if (fd_ >= 0) ::close(fd_);
}

void DecisionLog::append(const Decision& d) {
  const std::string line = serialize_decision(d) + '\n';
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(errno_message("decision log append failed"));
    }
    written += static_cast<std::size_t>(n);
  }
  if (sync_each_ && ::fsync(fd_) != 0) {
    throw IoError(errno_message("decision log fsync failed"));
  }
}

std::vector<Decision> DecisionLog::replay(const std::filesystem::path& path) {
  std::vector<Decision> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string content((std::istreambuf_iterator<char>(in)), {});
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < content.size()) {
    const auto nl = content.find('\n', start);
    if (nl == std::string::npos) break;  // partial final record
    ++line_no;
    const std::string_view line(content.data() + start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    try {
      out.push_back(parse_decision(line));
    } catch (const Error& e) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": " +
                         e.what());
    }
  }
  return out;
}

std::vector<CorpusRecord> sample_candidates(const std::filesystem::path& corpus,
                                            CorpusFormat format, std::size_t n,
                                            std::uint64_t seed) {
  if (n == 0) throw InvalidInput("sample size must be positive");
  std::mt19937_64 rng(seed);
  std::vector<CorpusRecord> reservoir;
  reservoir.reserve(n);

  PairReader reader(corpus, format, ReaderOptions{.normalize_text = false, .corpus_name = {}});
  std::uint64_t seen = 0;
  while (auto record = reader.next()) {
    ++seen;
    if (reservoir.size() < n) {
      reservoir.push_back(std::move(*record));
    } else {
      const std::uint64_t j = bounded(rng, seen);
      if (j < n) reservoir[j] = std::move(*record);
    }
  }
  if (seen < n) {
    throw InvalidInput("cannot sample " + std::to_string(n) + " pairs from a corpus of " +
                       std::to_string(seen));
  }
  for (std::size_t i = reservoir.size() - 1; i > 0; --i) {
    std::swap(reservoir[i], reservoir[bounded(rng, i + 1)]);
  }
  return reservoir;
}

AssessmentStats record_assessment_stats(std::span<const Decision> decisions) {
  if (decisions.empty()) throw InvalidInput("empty decision log");
  AssessmentStats stats;
  for (const auto label : kAllLabels) stats.per_label[std::string(to_string(label))] = 0;
  stats.per_label[std::string(kUnlabeled)] = 0;
  for (const auto& d : decisions) {
    const auto label = d.effective_label();
    ++stats.per_label[label ? std::string(to_string(*label)) : std::string(kUnlabeled)];
    if (label != DiscrepancyLabel::kAccurate) ++stats.defects;
    ++stats.total;
  }
  stats.defect_rate =
      static_cast<double>(stats.defects) / static_cast<double>(stats.total);
  return stats;
}

nlohmann::ordered_json to_json(const AssessmentStats& stats) {
  nlohmann::ordered_json j;
  j["per_label"] = stats.per_label;
  j["total"] = stats.total;
  j["defects"] = stats.defects;
  if (stats.total == 0) {
    j["defect_rate"] = nullptr;
  } else {
    j["defect_rate"] = stats.defect_rate;
  }
  return j;
}

CurationStore::CurationStore(const std::filesystem::path& queue_path,
                             const std::filesystem::path& log_path,
                             CurationOptions options)
    : options_(std::move(options)) {
  items_ = read_all(queue_path, CorpusFormat::kJsonl,
                    ReaderOptions{.normalize_text = false, .corpus_name = {}});
  if (items_.empty()) throw InvalidInput("review queue is empty: " + queue_path.string());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (!index_.emplace(items_[i].pair.id, i).second) {
      throw InvalidInput("duplicate pair id in queue: " + items_[i].pair.id);
    }
  }
  slots_.resize(items_.size());

  log_ = std::make_unique<DecisionLog>(log_path, options_.sync_each);
  for (const auto& d : DecisionLog::replay(log_path)) {
    const auto it = index_.find(d.pair_id);
    if (it == index_.end()) {
      throw InvalidInput("decision log references unknown pair " + d.pair_id);
    }
    if (slots_[it->second].state == State::kDecided) {
      spdlog::warn("decision log: ignoring repeated decision for {}", d.pair_id);
      continue;
    }
    apply(d);
  }
}

void CurationStore::apply(const Decision& d) {
  Slot& slot = slots_[index_.at(d.pair_id)];
  slot.state = State::kDecided;
  slot.reviewer.clear();
  decisions_.push_back(d);
}

bool CurationStore::available(const Slot& slot, TimePoint now) const {
  return slot.state == State::kPending ||
         (slot.state == State::kLeased && slot.expiry <= now);
}

std::optional<Lease> CurationStore::next_pending(const std::string& reviewer) {
  if (reviewer.empty()) throw InvalidInput("reviewer id required");
  std::unique_lock lock(mutex_);
  const TimePoint now = options_.now();

  std::optional<std::size_t> chosen;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const Slot& s = slots_[i];
    if (s.state == State::kLeased && s.reviewer == reviewer && s.expiry > now) {
      chosen = i;
      break;
    }
  }
  if (!chosen) {
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      if (available(slots_[i], now)) {
        chosen = i;
        break;
      }
    }
  }
  if (!chosen) return std::nullopt;

  Slot& slot = slots_[*chosen];
  slot.state = State::kLeased;
  slot.reviewer = reviewer;
  slot.expiry = now + options_.lease_window;
  return Lease{items_[*chosen], reviewer, slot.expiry};
}

Decision CurationStore::record_decision(Decision d) {
  validate(d);
  std::unique_lock lock(mutex_);
  const auto it = index_.find(d.pair_id);
  if (it == index_.end()) throw Error(ErrorKind::kNotFound, "unknown pair_id: " + d.pair_id);
  const Slot& slot = slots_[it->second];
  const TimePoint now = options_.now();
  if (slot.state == State::kDecided) {
    throw Error(ErrorKind::kConflict, "pair already decided: " + d.pair_id);
  }
  if (slot.state == State::kLeased && slot.reviewer != d.reviewer && slot.expiry > now) {
    throw Error(ErrorKind::kConflict,
                "pair " + d.pair_id + " is leased by another reviewer");
  }
  d.timestamp = now;
  log_->append(d);
  apply(d);
  return d;
}

QueueCounts CurationStore::counts() const {
  std::shared_lock lock(mutex_);
  const TimePoint now = options_.now();
  QueueCounts c;
  for (const auto& s : slots_) {
    if (s.state == State::kDecided) {
      ++c.decided;
    } else if (s.state == State::kLeased && s.expiry > now) {
      ++c.leased;
    } else {
      ++c.pending;
    }
  }
  return c;
}

AssessmentStats CurationStore::assessment() const {
  std::shared_lock lock(mutex_);
  if (decisions_.empty()) {
    AssessmentStats empty;
    for (const auto label : kAllLabels) empty.per_label[std::string(to_string(label))] = 0;
    empty.per_label[std::string(kUnlabeled)] = 0;
    return empty;
  }
  return record_assessment_stats(decisions_);
}

std::vector<Decision> CurationStore::decisions() const {
  std::shared_lock lock(mutex_);
  return decisions_;
}

std::vector<CorpusRecord> CurationStore::export_gold(ExportOrder order,
                                                     std::size_t limit) const {
  std::shared_lock lock(mutex_);
  std::vector<CorpusRecord> accepted;
  for (const auto& d : decisions_) {
    if (d.verdict == Verdict::kAccept) accepted.push_back(items_[index_.at(d.pair_id)]);
  }
  if (accepted.empty()) throw InvalidInput("empty gold set");
  if (order == ExportOrder::kScore) {
    std::stable_sort(accepted.begin(), accepted.end(),
                     [](const CorpusRecord& a, const CorpusRecord& b) {
                       if (a.score.has_value() != b.score.has_value()) {
                         return a.score.has_value();
                       }
                       return a.score && *a.score > *b.score;
                     });
  }
  if (accepted.size() > limit) accepted.resize(limit);
  return accepted;
}

}  // namespace bitext
