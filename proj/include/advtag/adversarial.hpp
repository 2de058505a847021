#pragma once

// Fast-gradient adversarial examples on normalized input embeddings.
//
// For a sentence with flattened input s of dimension D, the perturbation is
// eta = eps * g / ||g||_2 with g = dL/ds at the current parameters and
// eps = alpha * sqrt(D). Training minimizes
//
//   L~ = gamma * L(s) + (1 - gamma) * L(s + eta)
//
// where eta is a constant of the second term.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "advtag/network.hpp"

namespace advtag {

struct AdvConfig {
  double alpha = 0.05;
  double gamma = 0.5;
  bool enabled = false;

  void validate() const;
};

inline constexpr double kZeroGradientNorm = 1e-12;

struct Perturbation {
  Tensor eta;        // D
  Tensor gradient;   // g, D
  double epsilon = 0.0;
  std::size_t dimension = 0;
  bool zero_gradient = false;
};

std::vector<std::size_t> tag_ids(const Sentence& sentence, const Vocab& vocab);

// dL/ds for the sentence's gold tags, layout [words..., chars...].
Tensor input_gradient(const Model& model, const InputStats& stats,
                      const Sentence& sentence, const DropoutMasks& masks);
Tensor input_gradient(const Model& model, const InputStats& stats,
                      const Sentence& sentence);

Perturbation fgm_perturbation(const Tensor& gradient, double alpha,
                              std::size_t dimension);

// Loss and parameter gradients of one training example.
struct ExampleResult {
  double loss = 0.0;        // L for baseline, L~ for adversarial
  double clean_loss = 0.0;  // L(s)
  std::optional<double> adversarial_loss;  // L(s + eta), when computed
  std::optional<Perturbation> perturbation;
  Gradients gradients;
};

ExampleResult clean_example(const Model& model, const InputStats& stats,
                            const Sentence& sentence, const DropoutMasks& masks);
// Both passes use `masks`. Sentences whose input gradient vanishes fall back
// to the clean loss.
ExampleResult adversarial_example(const Model& model, const InputStats& stats,
                                  const Sentence& sentence,
                                  const DropoutMasks& masks, const AdvConfig& cfg);

// Scalar L~ for the sentence (no dropout).
double adversarial_loss(const Model& model, const InputStats& stats,
                        const Sentence& sentence, const AdvConfig& cfg);

// NLL of the gold tags given an explicit (possibly perturbed) input.
double loss_at(const Model& model, const SentenceInput& input,
               std::span<const std::size_t> tags, const DropoutMasks& masks);

}  // namespace advtag
