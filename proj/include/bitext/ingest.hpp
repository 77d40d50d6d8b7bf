#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bitext/corpus.hpp"

namespace bitext {

enum class CorpusFormat { kTsv, kJsonl };

std::optional<CorpusFormat> parse_format(std::string_view name);
// Picks the format from the file extension: ".tsv" or ".jsonl"/".json".
std::optional<CorpusFormat> format_from_path(const std::filesystem::path& path);

bool is_valid_utf8(std::string_view text);

// NFC composition, trim, and collapse of internal Unicode whitespace runs to a
// single U+0020. Case and punctuation are untouched. Idempotent.
std::string normalize(std::string_view text);

struct ReaderOptions {
  bool normalize_text = true;
  // Used for ids of the form "<corpus_name>:<line>" when a record has none.
  // Defaults to the file stem.
  std::string corpus_name;
};

// Streaming reader. Malformed lines (too few columns, bad JSON, invalid UTF-8,
// text empty after normalization) are skipped and counted.
class PairReader {
 public:
  PairReader(const std::filesystem::path& path, CorpusFormat format,
             ReaderOptions options = {});

  std::optional<CorpusRecord> next();

  std::uint64_t skipped() const noexcept { return skipped_; }
  std::uint64_t line_number() const noexcept { return line_no_; }

 private:
  std::optional<CorpusRecord> parse_line(const std::string& line);
  void warn_malformed(std::string_view reason);

  std::ifstream in_;
  CorpusFormat format_;
  ReaderOptions options_;
  std::uint64_t line_no_ = 0;
  std::uint64_t skipped_ = 0;
  std::string line_;
};

// Reads a whole corpus into memory. Test and small-file convenience.
std::vector<CorpusRecord> read_all(const std::filesystem::path& path,
                                   CorpusFormat format,
                                   ReaderOptions options = {});

// Streaming writer. TSV carries only source, target and id; text containing a
// tab or newline cannot be written as TSV.
class PairWriter {
 public:
  PairWriter(const std::filesystem::path& path, CorpusFormat format);

  void write(const CorpusRecord& record);
  void write(const SentencePair& pair) { write(CorpusRecord{pair, {}, {}}); }
  // Flushes and closes; throws IoError if anything failed.
  void close();

  std::uint64_t count() const noexcept { return count_; }

 private:
  void check_stream();

  std::filesystem::path path_;
  std::ofstream out_;
  CorpusFormat format_;
  std::uint64_t count_ = 0;
  std::vector<char> buffer_;
};

std::uint64_t write_pairs(std::span<const CorpusRecord> records,
                          const std::filesystem::path& path,
                          CorpusFormat format);
std::uint64_t write_pairs(std::span<const SentencePair> pairs,
                          const std::filesystem::path& path,
                          CorpusFormat format);

}  // namespace bitext
