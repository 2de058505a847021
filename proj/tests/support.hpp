#pragma once

// Small random models and sentences shared by the unit and acceptance tests.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "advtag/adversarial.hpp"
#include "advtag/autodiff.hpp"
#include "advtag/crf.hpp"
#include "advtag/network.hpp"
#include "advtag/trainer.hpp"
#include "oracles.hpp"

namespace support {

using namespace advtag;

inline TaggerArchitecture tiny_arch() {
  TaggerArchitecture a;
  a.char_dim = 3;
  a.char_hidden = 2;
  a.word_dim = 4;
  a.word_hidden = 3;
  a.dropout = 0.0;
  return a;
}

inline std::string random_word(std::mt19937_64& rng) {
  static const std::string letters = "abcde";
  std::uniform_int_distribution<std::size_t> len(1, 4);
  std::uniform_int_distribution<std::size_t> pick(0, letters.size() - 1);
  std::string w;
  for (std::size_t i = len(rng); i > 0; --i) w += letters[pick(rng)];
  return w;
}

inline Sentence random_sentence(std::size_t n, std::size_t tags, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> tag(0, tags - 1);
  Sentence s;
  for (std::size_t i = 0; i < n; ++i) {
    s.tokens.push_back({random_word(rng), "t" + std::to_string(tag(rng))});
  }
  return s;
}

// A training corpus guaranteed to contain every tag t0..t{k-1}.
inline Corpus random_corpus(std::size_t sentences, std::size_t max_len, std::size_t tags,
                            std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  Corpus c;
  for (std::size_t i = 0; i < sentences; ++i) c.push_back(random_sentence(len(rng), tags, rng));
  Sentence all;
  for (std::size_t t = 0; t < tags; ++t) all.tokens.push_back({random_word(rng), "t" + std::to_string(t)});
  c.push_back(all);
  return c;
}

// Overwrites every dense tensor (including CRF scores and biases) with
// U[-scale, scale] so that no term of the model is trivially zero.
inline void randomize(ModelParameters& p, std::mt19937_64& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (Tensor* t : p.dense_tensors()) {
    for (double& v : t->data()) v = u(rng);
  }
}

inline Model random_model(const Corpus& train, std::uint64_t seed,
                          TaggerArchitecture arch = tiny_arch()) {
  Model m = initialize_model(train, arch, seed);
  std::mt19937_64 rng(seed * 7919 + 1);
  randomize(m.params, rng);
  return m;
}

struct GradientAudit {
  double max_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // which block held the worst coordinate
};

// Backprop of the sentence NLL against central differences over every dense
// parameter, every input-leaf coordinate and every raw embedding row the
// sentence touches. Normalization statistics are held at their current value.
inline GradientAudit audit_gradients(const Model& model, const Sentence& sentence,
                                     double step, double floor = 1e-6) {
  const InputStats stats = InputStats::compute(model.params);
  const SentenceInput input = prepare_input(sentence, model.vocab, model.params, stats);
  const auto tags = tag_ids(sentence, model.vocab);
  const DropoutMasks masks = DropoutMasks::ones(sentence.size(), model.arch);

  Tape tape;
  const ModelVars vars = ModelVars::on(tape, model.params);
  const EncodedSentence enc = encode_sentence(tape, input, vars, model.arch, masks);
  const Var loss = nll(enc.emissions, vars.crf, tags);
  const GradientMap gm = tape.backward(loss);
  Gradients raw = Gradients::zeros_like(model.params);
  collect_gradients(gm, vars, enc, input, stats, raw);

  GradientAudit audit;
  auto record = [&](double analytic, double numeric, const std::string& where) {
    const double err = oracle::relative_error(analytic, numeric, floor);
    ++audit.coordinates;
    if (err > audit.max_error) {
      audit.max_error = err;
      audit.worst = where;
    }
  };

  const auto dense_vars = vars.dense_vars();
  const auto& names = ModelParameters::dense_tensor_names();
  for (std::size_t i = 0; i < dense_vars.size(); ++i) {
    const Tensor& g = gm[dense_vars[i]];
    Model probe = model;
    Tensor& target = *probe.params.dense_tensors()[i];
    for (std::size_t j = 0; j < target.size(); ++j) {
      const double x0 = target[j];
      const double numeric = oracle::central_difference(
          [&](double x) {
            target[j] = x;
            return loss_at(probe, input, tags, masks);
          },
          x0, step);
      target[j] = x0;
      record(g[j], numeric, names[i]);
    }
  }

  const Tensor g_input = flatten_input_gradient(gm, enc);
  Tensor delta(Shape{input.dimension()});
  for (std::size_t j = 0; j < delta.size(); ++j) {
    const double numeric = oracle::central_difference(
        [&](double x) {
          delta[j] = x;
          return loss_at(model, input.shifted(delta), tags, masks);
        },
        0.0, step);
    delta[j] = 0.0;
    record(g_input[j], numeric, "input");
  }

  auto check_rows = [&](const SparseRows& rows, bool words) {
    for (const auto& [row, g] : rows) {
      Model probe = model;
      EmbeddingTable& table = words ? probe.params.words : probe.params.chars;
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double x0 = table.matrix.at(row, j);
        const double numeric = oracle::central_difference(
            [&](double x) {
              table.matrix.at(row, j) = x;
              const SentenceInput moved =
                  prepare_input(sentence, probe.vocab, probe.params, stats);
              return loss_at(probe, moved, tags, masks);
            },
            x0, step);
        table.matrix.at(row, j) = x0;
        record(g[j], numeric, words ? "word table" : "char table");
      }
    }
  };
  check_rows(raw.words, true);
  check_rows(raw.chars, false);
  return audit;
}

}  // namespace support
