#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "advtag/autodiff.hpp"
#include "advtag/data.hpp"
#include "advtag/tensor.hpp"

namespace advtag {

inline constexpr double kStdFloor = 1e-6;

// Rows x dim lookup table plus the per-row weights used for normalization.
struct EmbeddingTable {
  Tensor matrix;                // rows x dim
  std::vector<double> weights;  // one per row, nonnegative, positive sum
  bool trainable = true;

  std::size_t rows() const { return matrix.rows(); }
  std::size_t dim() const { return matrix.cols(); }
  // Throws if the invariants above do not hold.
  void validate() const;
};

// Per-dimension weighted mean and floored standard deviation of a table.
struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t dim() const { return mean.size(); }
};

// Uniform in [-sqrt(3/d), sqrt(3/d)].
EmbeddingTable init_random(std::size_t rows, std::size_t dim,
                           std::vector<double> weights, std::mt19937_64& rng);
// Word table weighted by training frequency.
EmbeddingTable init_word_table(const Vocab& vocab, std::size_t dim,
                               std::mt19937_64& rng);
// Character table; uniform weights unless `frequency_weighted`.
EmbeddingTable init_char_table(const Vocab& vocab, std::size_t dim,
                               std::mt19937_64& rng,
                               bool frequency_weighted = false);

// Text format: one word per line followed by `dim` space-separated reals.
// Vocabulary words found in the file (compared lowercased, first occurrence
// wins) take the file row; the rest are drawn uniformly as in init_random.
EmbeddingTable load_pretrained(std::istream& in, const Vocab& vocab,
                               std::size_t dim, std::mt19937_64& rng);
EmbeddingTable load_pretrained(const std::filesystem::path& path,
                               const Vocab& vocab, std::size_t dim,
                               std::mt19937_64& rng);
// Writes every non-reserved vocabulary row in the same text format, using
// shortest round-trip number formatting.
void write_embeddings(const EmbeddingTable& table, const Vocab& vocab,
                      std::ostream& out);

NormalizationStats compute_stats(const EmbeddingTable& table);

// (row - mean) / std as a plain vector.
Tensor normalized_row(const EmbeddingTable& table, const NormalizationStats& stats,
                      std::size_t id);
// Same value recorded on a tape from a table leaf, so that gradients reach the
// raw row. Stats enter as constants.
Var normalized_lookup(Var table, const NormalizationStats& stats, std::size_t id);

// Maps a gradient w.r.t. a normalized row back to the raw row.
void accumulate_raw_gradient(const NormalizationStats& stats,
                             std::span<const double> normalized_grad,
                             std::span<double> raw_grad);

}  // namespace advtag
