#include "advtag/adversarial.hpp"

#include <cmath>
#include <stdexcept>

namespace advtag {

void AdvConfig::validate() const {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1]");
  }
}

std::vector<std::size_t> tag_ids(const Sentence& sentence, const Vocab& vocab) {
  std::vector<std::size_t> ids;
  ids.reserve(sentence.size());
  for (const Token& t : sentence.tokens) ids.push_back(vocab.tag_id(t.tag));
  return ids;
}

namespace {

struct Pass {
  double loss = 0.0;
  Gradients gradients;
  Tensor input_gradient;
};

Pass run_pass(const Model& model, const InputStats& stats, const SentenceInput& input,
              std::span<const std::size_t> tags, const DropoutMasks& masks) {
  Tape tape;
  const ModelVars vars = ModelVars::on(tape, model.params);
  const EncodedSentence enc = encode_sentence(tape, input, vars, model.arch, masks);
  const Var loss = nll(enc.emissions, vars.crf, tags);
  const GradientMap grads = tape.backward(loss);
  Pass pass;
  pass.loss = loss.value().item();
  collect_gradients(grads, vars, enc, input, stats, pass.gradients);
  pass.input_gradient = flatten_input_gradient(grads, enc);
  return pass;
}

}  // namespace

Tensor input_gradient(const Model& model, const InputStats& stats,
                      const Sentence& sentence, const DropoutMasks& masks) {
  const SentenceInput input = prepare_input(sentence, model.vocab, model.params, stats);
  const auto tags = tag_ids(sentence, model.vocab);
  Tape tape;
  const ModelVars vars = ModelVars::on(tape, model.params);
  const EncodedSentence enc = encode_sentence(tape, input, vars, model.arch, masks);
  const GradientMap grads = tape.backward(nll(enc.emissions, vars.crf, tags));
  return flatten_input_gradient(grads, enc);
}

Tensor input_gradient(const Model& model, const InputStats& stats,
                      const Sentence& sentence) {
  return input_gradient(model, stats, sentence,
                        DropoutMasks::ones(sentence.size(), model.arch));
}

Perturbation fgm_perturbation(const Tensor& gradient, double alpha,
                              std::size_t dimension) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("fgm: alpha must be >= 0");
  if (dimension == 0) throw std::invalid_argument("fgm: dimension must be >= 1");
  if (gradient.size() != dimension) {
    throw std::invalid_argument("fgm: gradient has " + std::to_string(gradient.size()) +
                                " entries, expected " + std::to_string(dimension));
  }
  Perturbation p;
  p.gradient = gradient;
  p.dimension = dimension;
  p.epsilon = alpha * std::sqrt(static_cast<double>(dimension));
  p.eta = Tensor(gradient.shape());
  const double norm = std::sqrt(gradient.squared_norm());
  if (!(norm >= kZeroGradientNorm)) {
    p.zero_gradient = true;
    return p;
  }
  const double factor = p.epsilon / norm;
  for (std::size_t i = 0; i < gradient.size(); ++i) p.eta[i] = factor * gradient[i];
  return p;
}

double loss_at(const Model& model, const SentenceInput& input,
               std::span<const std::size_t> tags, const DropoutMasks& masks) {
  Tape tape;
  const ModelVars vars = ModelVars::on(tape, model.params);
  const EncodedSentence enc = encode_sentence(tape, input, vars, model.arch, masks);
  return nll(enc.emissions.value(), model.params.crf, tags);
}

ExampleResult clean_example(const Model& model, const InputStats& stats,
                            const Sentence& sentence, const DropoutMasks& masks) {
  const SentenceInput input = prepare_input(sentence, model.vocab, model.params, stats);
  const auto tags = tag_ids(sentence, model.vocab);
  Pass pass = run_pass(model, stats, input, tags, masks);
  ExampleResult r;
  r.loss = pass.loss;
  r.clean_loss = pass.loss;
  r.gradients = std::move(pass.gradients);
  return r;
}

ExampleResult adversarial_example(const Model& model, const InputStats& stats,
                                  const Sentence& sentence,
                                  const DropoutMasks& masks, const AdvConfig& cfg) {
  cfg.validate();
  const SentenceInput input = prepare_input(sentence, model.vocab, model.params, stats);
  const auto tags = tag_ids(sentence, model.vocab);

  // One backward pass gives both the clean parameter gradient and g.
  Pass clean = run_pass(model, stats, input, tags, masks);
  Perturbation pert = fgm_perturbation(clean.input_gradient, cfg.alpha, input.dimension());

  ExampleResult r;
  r.clean_loss = clean.loss;
  // With eps = 0 the second pass would repeat the first; skipping it keeps
  // alpha = 0 bit-identical to baseline for every gamma.
  if (pert.zero_gradient || pert.epsilon == 0.0) {
    r.loss = clean.loss;
    r.gradients = std::move(clean.gradients);
    r.perturbation = std::move(pert);
    return r;
  }

  const SentenceInput adv_input = input.shifted(pert.eta);
  Pass adv = run_pass(model, stats, adv_input, tags, masks);
  r.adversarial_loss = adv.loss;
  r.loss = cfg.gamma * clean.loss + (1.0 - cfg.gamma) * adv.loss;
  r.gradients.add_scaled(cfg.gamma, clean.gradients);
  r.gradients.add_scaled(1.0 - cfg.gamma, adv.gradients);
  r.perturbation = std::move(pert);
  return r;
}

double adversarial_loss(const Model& model, const InputStats& stats,
                        const Sentence& sentence, const AdvConfig& cfg) {
  return adversarial_example(model, stats, sentence,
                             DropoutMasks::ones(sentence.size(), model.arch), cfg)
      .loss;
}

}  // namespace advtag
