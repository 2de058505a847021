#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advtag/data.hpp"
#include "advtag/embeddings.hpp"

namespace advtag {

enum class ChunkScheme { kIob2, kIobes };

// Inclusive token range [start, end] labeled with a chunk type.
struct Span {
  std::string type;
  std::size_t start = 0;
  std::size_t end = 0;

  friend auto operator<=>(const Span&, const Span&) = default;
};

// Strict decoding; throws DataError on sequences invalid for the scheme.
std::vector<Span> decode_spans(const std::vector<std::string>& tags, ChunkScheme scheme);
// Lenient decoding for predictions: a stray I-/E- opens a new chunk and a
// chunk left open is closed at the previous token.
std::vector<Span> decode_spans_repaired(const std::vector<std::string>& tags,
                                        ChunkScheme scheme);

struct ChunkScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t gold_spans = 0;
  std::size_t predicted_spans = 0;
  std::size_t matched = 0;
};

ChunkScores chunk_f1(const std::vector<std::vector<std::string>>& gold,
                     const std::vector<std::vector<std::string>>& predicted,
                     ChunkScheme scheme);
ChunkScores chunk_f1(const Corpus& gold, const Corpus& predicted, ChunkScheme scheme);

double token_accuracy(const Corpus& gold, const Corpus& predicted);
double sentence_accuracy(const Corpus& gold, const Corpus& predicted);

struct EvalReport {
  double token_accuracy = 0.0;
  double sentence_accuracy = 0.0;
  std::size_t tokens = 0;
  std::size_t sentences = 0;
  std::optional<ChunkScores> chunks;
  // (gold, predicted) -> count
  std::map<std::pair<std::string, std::string>, std::size_t> confusion;
};

EvalReport evaluate(const Corpus& gold, const Corpus& predicted,
                    std::optional<ChunkScheme> chunk_scheme = {});

struct Bucket {
  std::string label;
  std::int64_t lower = 0;  // inclusive
  std::int64_t upper = 0;  // exclusive; -1 for unbounded
  std::size_t count = 0;
  std::size_t correct = 0;

  double accuracy() const {
    return count == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(count);
  }
};

struct BucketReport {
  std::vector<Bucket> buckets;
  std::size_t total = 0;
};

// Buckets {0}, [1, b1), [b1, b2), ..., [bk, inf) for boundaries {b1, ..., bk}.
std::vector<Bucket> make_buckets(const std::vector<std::int64_t>& boundaries = {10, 100});

// Accuracy of test tokens grouped by their training frequency.
BucketReport frequency_buckets(const Vocab& vocab, const Corpus& gold,
                               const Corpus& predicted,
                               const std::vector<std::int64_t>& boundaries = {10, 100});
// Accuracy of the left and right neighbors of each test token, grouped by the
// center token's training frequency.
BucketReport neighbor_accuracy(const Vocab& vocab, const Corpus& gold,
                               const Corpus& predicted,
                               const std::vector<std::int64_t>& boundaries = {10, 100});

struct ClusterTightness {
  std::string tag;
  std::size_t members = 0;
  double tightness = 0.0;  // mean pairwise cosine; 0 with fewer than 2 members
};

struct TightnessReport {
  std::vector<ClusterTightness> clusters;
  double overall = 0.0;  // unweighted mean over clusters with >= 2 members
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Clusters test-set words by their unique gold tag and averages pairwise
// cosine similarity within each cluster. Words seen with several tags and
// words without a vocabulary entry are dropped. With `stats` the normalized
// vectors are compared, otherwise the raw rows.
TightnessReport cluster_tightness(const EmbeddingTable& table,
                                  const NormalizationStats* stats, const Vocab& vocab,
                                  const Corpus& test);

// Aligned-column text tables.
void print_eval_table(std::ostream& out,
                      const std::vector<std::pair<std::string, EvalReport>>& rows);
void print_bucket_table(std::ostream& out, const std::string& title,
                        const std::vector<std::pair<std::string, BucketReport>>& columns);
void print_tightness_table(
    std::ostream& out, const std::vector<std::pair<std::string, TightnessReport>>& columns);

// Percentage with two decimals, e.g. 0.97584 -> "97.58".
std::string format_percent(double rate);

}  // namespace advtag
