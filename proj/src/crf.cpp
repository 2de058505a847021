#include "advtag/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace advtag {

namespace {

void check_shapes(const Tensor& emissions, std::size_t k) {
  if (emissions.rank() != 2 || emissions.rows() == 0 || emissions.cols() != k) {
    throw ShapeError("crf", emissions.shape(), Shape{emissions.rows(), k});
  }
}

void check_tags(std::span<const std::size_t> tags, std::size_t n, std::size_t k) {
  if (tags.size() != n) {
    throw std::invalid_argument("crf: " + std::to_string(tags.size()) +
                                " tags for " + std::to_string(n) + " positions");
  }
  for (std::size_t t = 0; t < tags.size(); ++t) {
    if (tags[t] >= k) {
      throw std::out_of_range("crf: tag id " + std::to_string(tags[t]) +
                              " at position " + std::to_string(t) +
                              " out of range for " + std::to_string(k) + " tags");
    }
  }
}

double logsumexp_values(std::span<const double> xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

CrfParams CrfParams::zeros(std::size_t tag_count) {
  return CrfParams{Tensor({tag_count, tag_count}), Tensor({tag_count}),
                   Tensor({tag_count})};
}

CrfVars CrfVars::on(Tape& tape, const CrfParams& params) {
  return CrfVars{tape.parameter(params.transitions), tape.parameter(params.start),
                 tape.parameter(params.stop)};
}

double sequence_score(const Tensor& emissions, const CrfParams& crf,
                      std::span<const std::size_t> tags) {
  const std::size_t k = crf.tag_count();
  check_shapes(emissions, k);
  check_tags(tags, emissions.rows(), k);
  double s = crf.start[tags.front()] + crf.stop[tags.back()];
  for (std::size_t t = 0; t < tags.size(); ++t) {
    s += emissions.at(t, tags[t]);
    if (t > 0) s += crf.transitions.at(tags[t - 1], tags[t]);
  }
  return s;
}

double log_partition(const Tensor& emissions, const CrfParams& crf) {
  const std::size_t k = crf.tag_count();
  check_shapes(emissions, k);
  std::vector<double> alpha(k);
  for (std::size_t j = 0; j < k; ++j) alpha[j] = crf.start[j] + emissions.at(0, j);
  std::vector<double> next(k);
  std::vector<double> terms(k);
  for (std::size_t t = 1; t < emissions.rows(); ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < k; ++i) terms[i] = alpha[i] + crf.transitions.at(i, j);
      next[j] = logsumexp_values(terms) + emissions.at(t, j);
    }
    alpha.swap(next);
  }
  for (std::size_t j = 0; j < k; ++j) alpha[j] += crf.stop[j];
  return logsumexp_values(alpha);
}

double nll(const Tensor& emissions, const CrfParams& crf,
           std::span<const std::size_t> tags) {
  return log_partition(emissions, crf) - sequence_score(emissions, crf, tags);
}

ViterbiResult viterbi(const Tensor& emissions, const CrfParams& crf) {
  const std::size_t k = crf.tag_count();
  check_shapes(emissions, k);
  const std::size_t n = emissions.rows();
  std::vector<double> best(k);
  for (std::size_t j = 0; j < k; ++j) best[j] = crf.start[j] + emissions.at(0, j);
  std::vector<std::vector<std::size_t>> back(n, std::vector<std::size_t>(k, 0));
  std::vector<double> next(k);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t arg = 0;
      double val = best[0] + crf.transitions.at(0, j);
      for (std::size_t i = 1; i < k; ++i) {
        const double cand = best[i] + crf.transitions.at(i, j);
        if (cand > val) {
          val = cand;
          arg = i;
        }
      }
      next[j] = val + emissions.at(t, j);
      back[t][j] = arg;
    }
    best.swap(next);
  }
  std::size_t last = 0;
  double score = best[0] + crf.stop[0];
  for (std::size_t j = 1; j < k; ++j) {
    const double cand = best[j] + crf.stop[j];
    if (cand > score) {
      score = cand;
      last = j;
    }
  }
  ViterbiResult result;
  result.score = score;
  result.path.assign(n, 0);
  result.path[n - 1] = last;
  for (std::size_t t = n - 1; t > 0; --t) result.path[t - 1] = back[t][result.path[t]];
  return result;
}

Var sequence_score(Var emissions, const CrfVars& crf,
                   std::span<const std::size_t> tags) {
  const std::size_t k = crf.start.value().size();
  check_shapes(emissions.value(), k);
  check_tags(tags, emissions.value().rows(), k);
  Var s = add(slice(crf.start, tags.front(), 1), slice(crf.stop, tags.back(), 1));
  for (std::size_t t = 0; t < tags.size(); ++t) {
    s = add(s, element(emissions, t, tags[t]));
    if (t > 0) s = add(s, element(crf.transitions, tags[t - 1], tags[t]));
  }
  return s;
}

Var log_partition(Var emissions, const CrfVars& crf) {
  const std::size_t k = crf.start.value().size();
  check_shapes(emissions.value(), k);
  // incoming[j][i] = T[i][j]; adding alpha as a row vector gives
  // alpha[i] + T[i][j] at (j, i).
  const Var incoming = transpose(crf.transitions);
  Var alpha = add(crf.start, row(emissions, 0));
  for (std::size_t t = 1; t < emissions.value().rows(); ++t) {
    alpha = add(logsumexp(add(incoming, alpha), 1), row(emissions, t));
  }
  return logsumexp(add(alpha, crf.stop));
}

Var nll(Var emissions, const CrfVars& crf, std::span<const std::size_t> tags) {
  return sub(log_partition(emissions, crf), sequence_score(emissions, crf, tags));
}

}  // namespace advtag
