#include "bitext/ingest.hpp"

#include <memory>

#include <spdlog/spdlog.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "bitext/error.hpp"

namespace bitext {

namespace {

constexpr std::uint64_t kMaxWarnings = 20;

bool is_ascii(std::string_view text) {
  for (unsigned char c : text) {
    if (c >= 0x80) return false;
  }
  return true;
}

bool is_ascii_space(unsigned char c) {
  return c == ' ' || (c >= '\t' && c <= '\r');
}

std::string collapse_ascii(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (is_ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

const icu::Normalizer2& nfc() {
  static const icu::Normalizer2* instance = [] {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) {
      throw Error(ErrorKind::kInternal,
                  std::string("ICU NFC unavailable: ") + u_errorName(status));
    }
    return n;
  }();
  return *instance;
}

}  // namespace

std::optional<CorpusFormat> parse_format(std::string_view name) {
  if (name == "tsv") return CorpusFormat::kTsv;
  if (name == "jsonl" || name == "json") return CorpusFormat::kJsonl;
  return std::nullopt;
}

std::optional<CorpusFormat> format_from_path(
    const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext.empty()) return std::nullopt;
  return parse_format(std::string_view(ext).substr(1));
}

bool is_valid_utf8(std::string_view text) {
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(s, i, length, c);
    if (c < 0) return false;
  }
  return true;
}

std::string normalize(std::string_view text) {
  if (is_ascii(text)) return collapse_ascii(text);

  UErrorCode status = U_ZERO_ERROR;
  const icu::UnicodeString input = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString composed = nfc().normalize(input, status);
  if (U_FAILURE(status)) {
    throw Error(ErrorKind::kInternal,
                std::string("NFC normalization failed: ") + u_errorName(status));
  }

  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (int32_t i = 0; i < composed.length();) {
    const UChar32 c = composed.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = !collapsed.isEmpty();
      continue;
    }
    if (pending_space) collapsed.append(static_cast<UChar>(0x20));
    pending_space = false;
    collapsed.append(c);
  }
  std::string out;
  collapsed.toUTF8String(out);
  return out;
}

PairReader::PairReader(const std::filesystem::path& path, CorpusFormat format,
                       ReaderOptions options)
    : in_(path, std::ios::binary), format_(format), options_(std::move(options)) {
  if (!in_) throw IoError("cannot open corpus file: " + path.string());
  if (options_.corpus_name.empty()) {
    options_.corpus_name = path.stem().string();
  }
}

void PairReader::warn_malformed(std::string_view reason) {
  ++skipped_;
  if (skipped_ <= kMaxWarnings) {
    spdlog::warn("{}:{}: skipping malformed line ({})", options_.corpus_name,
                 line_no_, reason);
  } else if (skipped_ == kMaxWarnings + 1) {
    spdlog::warn("{}: further malformed-line warnings suppressed",
                 options_.corpus_name);
  }
}

std::optional<CorpusRecord> PairReader::next() {
  while (std::getline(in_, line_)) {
    ++line_no_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    if (auto record = parse_line(line_)) return record;
  }
  if (in_.bad()) throw IoError("read failure in corpus " + options_.corpus_name);
  return std::nullopt;
}

std::optional<CorpusRecord> PairReader::parse_line(const std::string& line) {
  if (!is_valid_utf8(line)) {
    warn_malformed("invalid UTF-8");
    return std::nullopt;
  }

  CorpusRecord record;
  if (format_ == CorpusFormat::kTsv) {
    std::vector<std::string_view> columns;
    std::string_view rest(line);
    for (;;) {
      const auto tab = rest.find('\t');
      columns.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (columns.size() < 2 || columns.size() > 3) {
      warn_malformed("expected 2 or 3 tab-separated columns");
      return std::nullopt;
    }
    record.pair.source_text = std::string(columns[0]);
    record.pair.target_text = std::string(columns[1]);
    if (columns.size() == 3) record.pair.id = std::string(columns[2]);
  } else {
    try {
      record = deserialize_record(line);
    } catch (const Error& e) {
      warn_malformed(e.what());
      return std::nullopt;
    }
  }

  bool empty_side = false;
  if (options_.normalize_text) {
    record.pair.source_text = normalize(record.pair.source_text);
    record.pair.target_text = normalize(record.pair.target_text);
    empty_side =
        record.pair.source_text.empty() || record.pair.target_text.empty();
  } else {
    empty_side = normalize(record.pair.source_text).empty() ||
                 normalize(record.pair.target_text).empty();
  }
  if (empty_side) {
    warn_malformed("empty side after normalization");
    return std::nullopt;
  }
  if (record.pair.id.empty()) {
    record.pair.id = options_.corpus_name + ":" + std::to_string(line_no_);
  }
  return record;
}

std::vector<CorpusRecord> read_all(const std::filesystem::path& path,
                                   CorpusFormat format, ReaderOptions options) {
  PairReader reader(path, format, std::move(options));
  std::vector<CorpusRecord> out;
  while (auto record = reader.next()) out.push_back(std::move(*record));
  return out;
}

PairWriter::PairWriter(const std::filesystem::path& path, CorpusFormat format)
    : path_(path), format_(format), buffer_(1 << 16) {
  out_.rdbuf()->pubsetbuf(buffer_.data(),
                          static_cast<std::streamsize>(buffer_.size()));
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot open output file: " + path.string());
}

void PairWriter::check_stream() {
  if (!out_) {
    throw IoError("write failed for " + path_.string() + " after " +
                  std::to_string(count_) + " records");
  }
}

void PairWriter::write(const CorpusRecord& record) {
  if (format_ == CorpusFormat::kTsv) {
    const auto unencodable = [](std::string_view s) {
      return s.find_first_of("\t\n\r") != std::string_view::npos;
    };
    if (unencodable(record.pair.source_text) ||
        unencodable(record.pair.target_text) || unencodable(record.pair.id)) {
      throw InvalidInput("unencodable in TSV; use JSONL");
    }
    out_ << record.pair.source_text << '\t' << record.pair.target_text;
    if (!record.pair.id.empty()) out_ << '\t' << record.pair.id;
    out_ << '\n';
  } else {
    out_ << serialize_record(record) << '\n';
  }
  check_stream();
  ++count_;
}

void PairWriter::close() {
  if (!out_.is_open()) return;
  out_.flush();
  check_stream();
  out_.close();
  if (out_.fail()) {
    throw IoError("close failed for " + path_.string() + " after " +
                  std::to_string(count_) + " records");
  }
}

std::uint64_t write_pairs(std::span<const CorpusRecord> records,
                          const std::filesystem::path& path,
                          CorpusFormat format) {
  PairWriter writer(path, format);
  for (const auto& r : records) writer.write(r);
  writer.close();
  return writer.count();
}

std::uint64_t write_pairs(std::span<const SentencePair> pairs,
                          const std::filesystem::path& path,
                          CorpusFormat format) {
  PairWriter writer(path, format);
  for (const auto& p : pairs) writer.write(p);
  writer.close();
  return writer.count();
}

}  // namespace bitext
