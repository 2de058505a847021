#pragma once

// First-order linear-chain CRF with explicit start/stop scores.
//
//   score(y) = start[y_1] + sum_t E[t][y_t] + sum_t T[y_{t-1}][y_t] + stop[y_n]
//   L(y)     = log Z - score(y)
//
// Each operation comes in two flavors: a plain numeric one over tensors and a
// tape one that records the computation for differentiation.

#include <cstddef>
#include <span>
#include <vector>

#include "advtag/autodiff.hpp"
#include "advtag/tensor.hpp"

namespace advtag {

struct CrfParams {
  Tensor transitions;  // k x k, row = previous tag
  Tensor start;        // k
  Tensor stop;         // k

  static CrfParams zeros(std::size_t tag_count);
  std::size_t tag_count() const { return start.size(); }
};

// Tape view of CrfParams.
struct CrfVars {
  Var transitions;
  Var start;
  Var stop;

  static CrfVars on(Tape& tape, const CrfParams& params);
};

struct ViterbiResult {
  std::vector<std::size_t> path;
  double score = 0.0;
};

double sequence_score(const Tensor& emissions, const CrfParams& crf,
                      std::span<const std::size_t> tags);
double log_partition(const Tensor& emissions, const CrfParams& crf);
double nll(const Tensor& emissions, const CrfParams& crf,
           std::span<const std::size_t> tags);
// Ties resolve to the lowest tag id at every backtrack step.
ViterbiResult viterbi(const Tensor& emissions, const CrfParams& crf);

Var sequence_score(Var emissions, const CrfVars& crf,
                   std::span<const std::size_t> tags);
Var log_partition(Var emissions, const CrfVars& crf);
Var nll(Var emissions, const CrfVars& crf, std::span<const std::size_t> tags);

}  // namespace advtag
