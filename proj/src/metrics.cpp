#include "bitext/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <spdlog/spdlog.h>
#include <unicode/utf8.h>

#include "bitext/error.hpp"
#include "bitext/ingest.hpp"

namespace bitext {

namespace {

void require_items(const EvalSet& set) {
  if (set.items.empty()) throw InvalidInput("empty evaluation set");
}

std::u32string code_points_without_spaces(std::string_view text) {
  const std::string normalized = normalize(text);
  std::u32string out;
  out.reserve(normalized.size());
  const auto* s = reinterpret_cast<const uint8_t*>(normalized.data());
  const auto length = static_cast<int32_t>(normalized.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(s, i, length, c);
    if (c != U' ') out.push_back(static_cast<char32_t>(c < 0 ? 0xFFFD : c));
  }
  return out;
}

template <typename Key>
using Counts = std::unordered_map<Key, int>;

Counts<std::string> word_ngrams(const std::vector<std::string>& tokens,
                                std::size_t n) {
  Counts<std::string> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      key.push_back(' ');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

Counts<std::u32string> char_ngrams(const std::u32string& chars, std::size_t n) {
  Counts<std::u32string> counts;
  if (chars.size() < n) return counts;
  for (std::size_t i = 0; i + n <= chars.size(); ++i) {
    ++counts[chars.substr(i, n)];
  }
  return counts;
}

template <typename Key>
long long clipped_matches(const Counts<Key>& hyp, const Counts<Key>& ref) {
  long long matches = 0;
  for (const auto& [gram, count] : hyp) {
    if (const auto it = ref.find(gram); it != ref.end()) {
      matches += std::min(count, it->second);
    }
  }
  return matches;
}

template <typename Key>
long long total(const Counts<Key>& counts) {
  long long t = 0;
  for (const auto& [gram, count] : counts) t += count;
  return t;
}

// [hyp, ref, match] per order, character orders first.
struct ChrfStats {
  std::vector<long long> hyp;
  std::vector<long long> ref;
  std::vector<long long> match;

  explicit ChrfStats(std::size_t orders)
      : hyp(orders, 0), ref(orders, 0), match(orders, 0) {}

  void add(const ChrfStats& other) {
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      hyp[i] += other.hyp[i];
      ref[i] += other.ref[i];
      match[i] += other.match[i];
    }
  }
};

ChrfStats chrf_segment_stats(const EvalItem& item, const ChrfOptions& options) {
  const auto n_char = static_cast<std::size_t>(options.char_order);
  const auto n_word = static_cast<std::size_t>(options.word_order);
  ChrfStats stats(n_char + n_word);

  const std::u32string hyp_chars = code_points_without_spaces(item.hypothesis);
  const std::u32string ref_chars = code_points_without_spaces(item.reference);
  for (std::size_t n = 1; n <= n_char; ++n) {
    const auto h = char_ngrams(hyp_chars, n);
    const auto r = char_ngrams(ref_chars, n);
    stats.hyp[n - 1] = total(h);
    stats.ref[n - 1] = total(r);
    stats.match[n - 1] = clipped_matches(h, r);
  }
  if (n_word > 0) {
    const auto hyp_tokens = tokenize(item.hypothesis);
    const auto ref_tokens = tokenize(item.reference);
    for (std::size_t n = 1; n <= n_word; ++n) {
      const auto h = word_ngrams(hyp_tokens, n);
      const auto r = word_ngrams(ref_tokens, n);
      stats.hyp[n_char + n - 1] = total(h);
      stats.ref[n_char + n - 1] = total(r);
      stats.match[n_char + n - 1] = clipped_matches(h, r);
    }
  }
  return stats;
}

double chrf_score(const ChrfStats& stats, double beta) {
  const double factor = beta * beta;
  double avg_prec = 0.0;
  double avg_rec = 0.0;
  int effective_order = 0;
  for (std::size_t i = 0; i < stats.hyp.size(); ++i) {
    if (stats.hyp[i] > 0 && stats.ref[i] > 0) {
      avg_prec += static_cast<double>(stats.match[i]) / static_cast<double>(stats.hyp[i]);
      avg_rec += static_cast<double>(stats.match[i]) / static_cast<double>(stats.ref[i]);
      ++effective_order;
    }
  }
  if (effective_order == 0) return 0.0;
  avg_prec /= effective_order;
  avg_rec /= effective_order;
  if (avg_prec + avg_rec == 0.0) return 0.0;
  return 100.0 * (1.0 + factor) * avg_prec * avg_rec /
         (factor * avg_prec + avg_rec);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  const std::string normalized = normalize(text);
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < normalized.size()) {
    const auto space = normalized.find(' ', start);
    const auto end = space == std::string::npos ? normalized.size() : space;
    if (end > start) tokens.push_back(normalized.substr(start, end - start));
    start = end + 1;
  }
  return tokens;
}

EvalSet load_eval_set(const std::filesystem::path& set_path,
                      const std::filesystem::path& hypotheses_path) {
  std::ifstream in(set_path, std::ios::binary);
  if (!in) throw IoError("cannot open evaluation set: " + set_path.string());
  std::ifstream hyp_in;
  if (!hypotheses_path.empty()) {
    hyp_in.open(hypotheses_path, std::ios::binary);
    if (!hyp_in) {
      throw IoError("cannot open hypotheses: " + hypotheses_path.string());
    }
  }

  EvalSet set;
  set.name = set_path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    const std::string where = set_path.string() + ":" + std::to_string(line_no);
    if (j.is_discarded() || !j.is_object() || !j.contains("tgt") ||
        !j["tgt"].is_string()) {
      throw InvalidInput(where + ": expected an object with string \"tgt\"");
    }
    EvalItem item;
    item.reference = j["tgt"].get<std::string>();
    if (hyp_in.is_open()) {
      if (!std::getline(hyp_in, item.hypothesis)) {
        throw InvalidInput("hypotheses file has fewer lines than " +
                           set_path.string());
      }
      if (!item.hypothesis.empty() && item.hypothesis.back() == '\r') {
        item.hypothesis.pop_back();
      }
    } else if (j.contains("hyp") && j["hyp"].is_string()) {
      item.hypothesis = j["hyp"].get<std::string>();
    } else {
      throw InvalidInput(where + ": no hypothesis (\"hyp\" field or --hyp file)");
    }
    set.items.push_back(std::move(item));
  }
  if (hyp_in.is_open()) {
    std::string extra;
    while (std::getline(hyp_in, extra)) {
      if (!extra.empty()) {
        throw InvalidInput("hypotheses file has more lines than " +
                           set_path.string());
      }
    }
  }
  return set;
}

double bleu_corpus(const EvalSet& set, const BleuOptions& options) {
  require_items(set);
  const auto max_n = static_cast<std::size_t>(options.max_n);
  std::vector<long long> correct(max_n, 0);
  std::vector<long long> totals(max_n, 0);
  long long sys_len = 0;
  long long ref_len = 0;

  for (const auto& item : set.items) {
    const auto hyp = tokenize(item.hypothesis);
    const auto ref = tokenize(item.reference);
    sys_len += static_cast<long long>(hyp.size());
    ref_len += static_cast<long long>(ref.size());
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto h = word_ngrams(hyp, n);
      const auto r = word_ngrams(ref, n);
      correct[n - 1] += clipped_matches(h, r);
      totals[n - 1] += hyp.size() >= n ? static_cast<long long>(hyp.size() - n + 1) : 0;
    }
  }

  if (sys_len == 0) {
    spdlog::warn("BLEU: hypothesis corpus is empty; scoring 0");
    return 0.0;
  }
  if (std::all_of(correct.begin(), correct.end(),
                  [](long long c) { return c == 0; })) {
    return 0.0;
  }

  const double bp =
      sys_len < ref_len
          ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(sys_len))
          : 1.0;

  // Orders with no hypothesis n-grams anywhere in the corpus are left out of
  // the geometric mean.
  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < max_n; ++n) {
    if (totals[n] == 0) break;
    ++orders;
    double precision = 0.0;
    if (correct[n] > 0) {
      precision = static_cast<double>(correct[n]) / static_cast<double>(totals[n]);
    } else if (options.smoothing == BleuSmoothing::kFloor) {
      precision = options.epsilon / static_cast<double>(totals[n]);
    } else {
      return 0.0;
    }
    log_sum += std::log(precision);
  }
  return std::clamp(100.0 * bp * std::exp(log_sum / static_cast<double>(orders)),
                    0.0, 100.0);
}

double chrf(const EvalSet& set, const ChrfOptions& options) {
  require_items(set);
  const std::size_t orders =
      static_cast<std::size_t>(options.char_order + options.word_order);
  if (options.aggregation == ChrfAggregation::kCorpus) {
    ChrfStats corpus(orders);
    for (const auto& item : set.items) {
      corpus.add(chrf_segment_stats(item, options));
    }
    return std::clamp(chrf_score(corpus, options.beta), 0.0, 100.0);
  }
  double sum = 0.0;
  for (const auto& item : set.items) {
    if (normalize(item.hypothesis).empty() && normalize(item.reference).empty()) {
      spdlog::warn("chrF: empty hypothesis and reference; segment scores 0");
    }
    sum += chrf_score(chrf_segment_stats(item, options), options.beta);
  }
  return std::clamp(sum / static_cast<double>(set.items.size()), 0.0, 100.0);
}

double chrf_pp(const EvalSet& set) {
  ChrfOptions options;
  options.word_order = 2;
  return chrf(set, options);
}

std::vector<int> meteor_align(const std::vector<std::string>& hyp,
                              const std::vector<std::string>& ref) {
  std::vector<int> alignment(hyp.size(), -1);
  std::vector<bool> used(ref.size(), false);
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (!used[j] && hyp[i] == ref[j]) {
        used[j] = true;
        alignment[i] = static_cast<int>(j);
        break;
      }
    }
  }
  return alignment;
}

int count_chunks(const std::vector<int>& alignment) {
  int chunks = 0;
  int prev_ref = -2;
  bool prev_aligned = false;
  for (int r : alignment) {
    if (r < 0) {
      prev_aligned = false;
      continue;
    }
    if (!prev_aligned || r != prev_ref + 1) ++chunks;
    prev_ref = r;
    prev_aligned = true;
  }
  return chunks;
}

double meteor_segment(const std::vector<std::string>& hyp,
                      const std::vector<std::string>& ref,
                      const MeteorOptions& options) {
  const auto alignment = meteor_align(hyp, ref);
  const auto matches = static_cast<double>(
      std::count_if(alignment.begin(), alignment.end(), [](int r) { return r >= 0; }));
  if (matches == 0.0) return 0.0;
  const double precision = matches / static_cast<double>(hyp.size());
  const double recall = matches / static_cast<double>(ref.size());
  const double f_mean = precision * recall /
                        (options.alpha * precision + (1.0 - options.alpha) * recall);
  const double fragmentation = static_cast<double>(count_chunks(alignment)) / matches;
  const double penalty = options.gamma * std::pow(fragmentation, options.beta);
  return f_mean * (1.0 - penalty);
}

double meteor_simple(const EvalSet& set, const MeteorOptions& options) {
  require_items(set);
  double sum = 0.0;
  for (const auto& item : set.items) {
    sum += meteor_segment(tokenize(item.hypothesis), tokenize(item.reference),
                          options);
  }
  return std::clamp(100.0 * sum / static_cast<double>(set.items.size()), 0.0,
                    100.0);
}

double sbert_score(const EvalSet& set, EmbeddingProvider& provider) {
  require_items(set);
  const std::size_t per_batch = std::max<std::size_t>(1, provider.batch_limit() / 2);
  double sum = 0.0;
  std::vector<std::string> texts;
  for (std::size_t begin = 0; begin < set.items.size(); begin += per_batch) {
    const std::size_t end = std::min(set.items.size(), begin + per_batch);
    texts.clear();
    for (std::size_t i = begin; i < end; ++i) {
      texts.push_back(normalize(set.items[i].hypothesis));
      texts.push_back(normalize(set.items[i].reference));
    }
    const auto embeddings = embed_batch(texts, provider);
    for (std::size_t k = 0; k < embeddings.size(); k += 2) {
      try {
        sum += clamp_similarity(cosine(embeddings[k], embeddings[k + 1]));
      } catch (const Error&) {
        // Zero vector on one side: no similarity evidence.
      }
    }
  }
  return std::clamp(100.0 * sum / static_cast<double>(set.items.size()), 0.0,
                    100.0);
}

nlohmann::ordered_json to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["bleu"] = report.bleu;
  j["meteor"] = report.meteor;
  j["chrf"] = report.chrf;
  j["chrf_pp"] = report.chrf_pp;
  j["sbert_score"] = report.sbert_score;
  j["n_items"] = report.n_items;
  return j;
}

MetricReport evaluate(const EvalSet& set, EmbeddingProvider& provider) {
  require_items(set);
  MetricReport report;
  report.n_items = set.items.size();
  const auto run = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      throw Error(e.kind(), std::string("metric ") + name + " failed: " + e.what());
    }
  };
  report.bleu = run("bleu", [&] { return bleu_corpus(set); });
  report.meteor = run("meteor", [&] { return meteor_simple(set); });
  report.chrf = run("chrf", [&] { return chrf(set); });
  report.chrf_pp = run("chrf_pp", [&] { return chrf_pp(set); });
  report.sbert_score = run("sbert_score", [&] { return sbert_score(set, provider); });
  return report;
}

}  // namespace bitext
