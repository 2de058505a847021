#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "advtag/autodiff.hpp"
#include "advtag/crf.hpp"
#include "advtag/data.hpp"
#include "advtag/embeddings.hpp"
#include "advtag/tensor.hpp"

namespace advtag {

// Single-direction LSTM weights. Gate rows are laid out as
// [input | forget | candidate | output], each `hidden` rows tall.
struct LstmParams {
  Tensor input_weights;   // 4h x in
  Tensor hidden_weights;  // 4h x h
  Tensor bias;            // 4h

  static LstmParams init(std::size_t input_size, std::size_t hidden,
                         std::mt19937_64& rng);
  std::size_t hidden() const { return bias.size() / 4; }
  std::size_t input_size() const { return input_weights.cols(); }
};

struct LstmVars {
  Var input_weights;
  Var hidden_weights;
  Var bias;
  std::size_t hidden = 0;

  static LstmVars on(Tape& tape, const LstmParams& params);
};

struct LstmState {
  Var h;
  Var c;
};

// i, f, o = sigmoid(.), g = tanh(.), c = f*c_prev + i*g, h = o*tanh(c).
LstmState lstm_cell(Var x, Var h_prev, Var c_prev, const LstmVars& params);

struct TaggerArchitecture {
  std::size_t char_dim = 30;
  std::size_t char_hidden = 50;
  std::size_t word_dim = 100;
  std::size_t word_hidden = 200;
  std::size_t tag_count = 0;
  double dropout = 0.5;

  void validate() const;
  std::size_t char_repr_dim() const { return 2 * char_hidden; }
  std::size_t token_dim() const { return word_dim + char_repr_dim(); }

  friend bool operator==(const TaggerArchitecture&,
                         const TaggerArchitecture&) = default;
};

// Everything the optimizer updates.
struct ModelParameters {
  EmbeddingTable words;
  EmbeddingTable chars;
  LstmParams char_fwd;
  LstmParams char_bwd;
  LstmParams word_fwd;
  LstmParams word_bwd;
  Tensor projection;       // tag_count x 2 * word_hidden
  Tensor projection_bias;  // tag_count
  CrfParams crf;

  static ModelParameters init(const TaggerArchitecture& arch, const Vocab& vocab,
                              std::mt19937_64& rng,
                              bool char_frequency_weighting = false);

  // All dense (non-embedding) tensors in a fixed order.
  std::vector<Tensor*> dense_tensors();
  std::vector<const Tensor*> dense_tensors() const;
  static const std::vector<std::string>& dense_tensor_names();

  friend bool operator==(const ModelParameters& a, const ModelParameters& b);
};

struct Model {
  TaggerArchitecture arch;
  Vocab vocab;
  ModelParameters params;
  // "iobes" when training tags were converted from IOB to IOBES, else "none".
  std::string tag_scheme = "none";
};

// Embedding-table statistics used for every lookup in one batch.
struct InputStats {
  NormalizationStats words;
  NormalizationStats chars;

  static InputStats compute(const ModelParameters& params);
};

// The normalized input embeddings s of one sentence, kept with the ids they
// came from. Flattened layout is [w_1, ..., w_n, c_1, c_2, ...] where the
// characters run over all tokens in order.
struct SentenceInput {
  std::vector<std::size_t> word_ids;
  std::vector<std::vector<std::size_t>> char_ids;
  std::vector<Tensor> word_vectors;
  std::vector<std::vector<Tensor>> char_vectors;

  std::size_t size() const { return word_ids.size(); }
  std::size_t dimension() const;
  Tensor flatten() const;
  // Returns a copy with `delta` (flattened layout) added.
  SentenceInput shifted(const Tensor& delta) const;
};

SentenceInput prepare_input(const Sentence& sentence, const Vocab& vocab,
                            const ModelParameters& params, const InputStats& stats);

// Per-token masks multiplied into the word-LSTM inputs and outputs.
struct DropoutMasks {
  std::vector<Tensor> inputs;   // token_dim each
  std::vector<Tensor> outputs;  // 2 * word_hidden each

  static DropoutMasks ones(std::size_t length, const TaggerArchitecture& arch);
  // Inverted dropout: each entry is 0 with probability `rate`, otherwise
  // 1 / (1 - rate).
  static DropoutMasks sample(std::size_t length, const TaggerArchitecture& arch,
                             double rate, std::mt19937_64& rng);
};

// Tape view of the dense parameters.
struct ModelVars {
  LstmVars char_fwd;
  LstmVars char_bwd;
  LstmVars word_fwd;
  LstmVars word_bwd;
  Var projection;
  Var projection_bias;
  CrfVars crf;

  static ModelVars on(Tape& tape, const ModelParameters& params);
  // Aligned with ModelParameters::dense_tensors().
  std::vector<Var> dense_vars() const;
};

// concat(forward state after the last char, backward state after the first).
Var char_representation(std::span<const Var> chars, const LstmVars& forward,
                        const LstmVars& backward);

struct EncodedSentence {
  Var emissions;  // n x tag_count
  std::vector<Var> word_leaves;
  std::vector<std::vector<Var>> char_leaves;

  // Leaves of s in flattened layout order.
  std::vector<Var> input_leaves() const;
};

EncodedSentence encode_sentence(Tape& tape, const SentenceInput& input,
                                const ModelVars& vars,
                                const TaggerArchitecture& arch,
                                const DropoutMasks& masks);
EncodedSentence encode_sentence(Tape& tape, const Sentence& sentence,
                                const Model& model, const InputStats& stats,
                                const ModelVars& vars, const DropoutMasks& masks);

// Emission scores computed without keeping a tape around.
Tensor compute_emissions(const Model& model, const InputStats& stats,
                         const Sentence& sentence);

// Gradient of the flattened input s from one backward pass.
Tensor flatten_input_gradient(const GradientMap& grads,
                              const EncodedSentence& encoded);

using SparseRows = std::map<std::size_t, std::vector<double>>;

// Parameter gradients. Dense tensors mirror ModelParameters::dense_tensors();
// embedding-table gradients are stored per touched row.
struct Gradients {
  std::vector<Tensor> dense;
  SparseRows words;
  SparseRows chars;

  static Gradients zeros_like(const ModelParameters& params);
  // this += factor * other
  void add_scaled(double factor, const Gradients& other);
  void scale(double factor);
  double squared_norm() const;
  bool all_finite() const;
};

// Adds the parameter gradients of one tape to `out`. Input-leaf gradients are
// mapped back to raw embedding rows through the (constant) normalization.
void collect_gradients(const GradientMap& grads, const ModelVars& vars,
                       const EncodedSentence& encoded, const SentenceInput& input,
                       const InputStats& stats, Gradients& out);

}  // namespace advtag
