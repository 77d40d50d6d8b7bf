#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bitext/similarity.hpp"

namespace bitext {

struct EvalItem {
  std::string hypothesis;
  std::string reference;
};

struct EvalSet {
  std::string name;
  std::vector<EvalItem> items;
};

// Loads an evaluation set from JSONL records {"src", "tgt", "hyp"}. The
// reference is "tgt". Hypotheses come from each record's "hyp" field, or, when
// `hypotheses_path` is given, from that file one line per record.
EvalSet load_eval_set(const std::filesystem::path& set_path,
                      const std::filesystem::path& hypotheses_path = {});

// Whitespace tokens of normalize(text).
std::vector<std::string> tokenize(std::string_view text);

enum class BleuSmoothing { kNone, kFloor };

struct BleuOptions {
  int max_n = 4;
  BleuSmoothing smoothing = BleuSmoothing::kFloor;
  double epsilon = 0.1;
};

// Corpus BLEU on a 0-100 scale. Clipped n-gram matches and totals are summed
// over all segments before the precisions are formed; a zero-match order is
// floored to epsilon / total under kFloor smoothing. Orders longer than every
// hypothesis are dropped from the geometric mean.
double bleu_corpus(const EvalSet& set, const BleuOptions& options = {});

enum class ChrfAggregation {
  kCorpus,       // n-gram statistics summed over segments, one F-score
  kSegmentMean,  // F-score per segment, arithmetic mean
};

struct ChrfOptions {
  int char_order = 6;
  int word_order = 0;
  double beta = 2.0;
  ChrfAggregation aggregation = ChrfAggregation::kCorpus;
};

// Character n-gram F-beta on a 0-100 scale. Whitespace is removed before
// character n-grams are extracted; word n-grams use whitespace tokens.
// Precision and recall are averaged over the orders for which both sides
// have at least one n-gram, then combined.
double chrf(const EvalSet& set, const ChrfOptions& options = {});
// chrF with word unigrams and bigrams added to the six character orders.
double chrf_pp(const EvalSet& set);

struct MeteorOptions {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

// Exact-match unigram alignment: each hypothesis token, left to right, takes
// the leftmost unused identical reference token. A[i] is the reference index
// of hypothesis token i, or -1.
std::vector<int> meteor_align(const std::vector<std::string>& hyp,
                              const std::vector<std::string>& ref);
// Number of maximal runs of aligned tokens that are contiguous in both the
// hypothesis and the reference.
int count_chunks(const std::vector<int>& alignment);

double meteor_segment(const std::vector<std::string>& hyp,
                      const std::vector<std::string>& ref,
                      const MeteorOptions& options = {});
// Mean segment METEOR (exact-match stage only) on a 0-100 scale.
double meteor_simple(const EvalSet& set, const MeteorOptions& options = {});

// Mean of clamp(cosine(embed(hyp), embed(ref))) on a 0-100 scale. Segments
// where either side embeds to the zero vector score 0.
double sbert_score(const EvalSet& set, EmbeddingProvider& provider);

struct MetricReport {
  double bleu = 0.0;
  double meteor = 0.0;
  double chrf = 0.0;
  double chrf_pp = 0.0;
  double sbert_score = 0.0;
  std::size_t n_items = 0;
};

nlohmann::ordered_json to_json(const MetricReport& report);

// All five metrics on the same set. Throws InvalidInput("empty evaluation
// set") for an empty set and names the failing metric otherwise.
MetricReport evaluate(const EvalSet& set, EmbeddingProvider& provider);

}  // namespace bitext
