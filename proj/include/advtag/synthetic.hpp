#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "advtag/data.hpp"

namespace advtag {

struct WeightedWord {
  std::string word;
  double weight = 0.0;
};

// First-order HMM over tags with per-tag word emissions.
struct HmmSpec {
  std::vector<std::string> tags;
  std::vector<double> initial;                   // k, sums to 1
  std::vector<std::vector<double>> transitions;  // k x k, row-stochastic
  std::vector<std::vector<WeightedWord>> emissions;  // per tag, weights sum to 1
  std::uint64_t seed = 1;

  void validate() const;
};

// Samples `n_sentences` sentences with lengths uniform in [1, max_len].
Corpus generate(const HmmSpec& spec, std::size_t n_sentences, std::size_t max_len);

// Spec with `lexicon_size` distinct words split evenly over `tag_count` tags.
// Each tag's words share a tag-specific suffix and carry Zipfian weights
// (1/rank). A fraction `ambiguity` of each tag's emission mass goes to words
// of the next tag, so some word types appear under two tags.
HmmSpec zipfian_spec(std::size_t tag_count, std::size_t lexicon_size,
                     std::uint64_t seed, double ambiguity = 0.0);

// One word per tag; tags are fully determined by words.
HmmSpec bijective_spec(std::size_t tag_count, std::uint64_t seed);

}  // namespace advtag
