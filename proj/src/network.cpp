#include "advtag/network.hpp"

#include <cmath>
#include <stdexcept>

namespace advtag {

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t({rows, cols});
  for (double& v : t.data()) v = dist(rng);
  return t;
}

void add_rows(SparseRows& dst, const SparseRows& src, double factor) {
  for (const auto& [id, values] : src) {
    auto [it, inserted] = dst.try_emplace(id, values.size(), 0.0);
    auto& row = it->second;
    for (std::size_t j = 0; j < values.size(); ++j) row[j] += factor * values[j];
  }
}

std::vector<double>& row_slot(SparseRows& rows, std::size_t id, std::size_t dim) {
  return rows.try_emplace(id, dim, 0.0).first->second;
}

}  // namespace

LstmParams LstmParams::init(std::size_t input_size, std::size_t hidden,
                            std::mt19937_64& rng) {
  LstmParams p;
  p.input_weights = glorot(4 * hidden, input_size, rng);
  p.hidden_weights = glorot(4 * hidden, hidden, rng);
  p.bias = Tensor({4 * hidden});
  for (std::size_t j = hidden; j < 2 * hidden; ++j) p.bias[j] = 1.0;
  return p;
}

LstmVars LstmVars::on(Tape& tape, const LstmParams& params) {
  return LstmVars{tape.parameter(params.input_weights),
                  tape.parameter(params.hidden_weights), tape.parameter(params.bias),
                  params.hidden()};
}

LstmState lstm_cell(Var x, Var h_prev, Var c_prev, const LstmVars& p) {
  const std::size_t h = p.hidden;
  if (x.shape().size() != 1 || x.shape()[0] != p.input_weights.value().cols()) {
    throw ShapeError("lstm_cell", p.input_weights.shape(), x.shape());
  }
  if (h_prev.shape() != Shape{h} || c_prev.shape() != Shape{h}) {
    throw ShapeError("lstm_cell", Shape{h}, h_prev.shape());
  }
  const Var pre = add(add(matmul(p.input_weights, x), matmul(p.hidden_weights, h_prev)),
                      p.bias);
  const Var i = sigmoid(slice(pre, 0, h));
  const Var f = sigmoid(slice(pre, h, h));
  const Var g = tanh(slice(pre, 2 * h, h));
  const Var o = sigmoid(slice(pre, 3 * h, h));
  const Var c = add(mul(f, c_prev), mul(i, g));
  return LstmState{mul(o, tanh(c)), c};
}

void TaggerArchitecture::validate() const {
  if (char_dim == 0 || char_hidden == 0 || word_dim == 0 || word_hidden == 0 ||
      tag_count == 0) {
    throw std::invalid_argument("architecture extents must all be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
}

ModelParameters ModelParameters::init(const TaggerArchitecture& arch,
                                      const Vocab& vocab, std::mt19937_64& rng,
                                      bool char_frequency_weighting) {
  arch.validate();
  if (arch.tag_count != vocab.tag_count()) {
    throw std::invalid_argument("architecture tag count does not match vocabulary");
  }
  ModelParameters p;
  p.words = init_word_table(vocab, arch.word_dim, rng);
  p.chars = init_char_table(vocab, arch.char_dim, rng, char_frequency_weighting);
  p.char_fwd = LstmParams::init(arch.char_dim, arch.char_hidden, rng);
  p.char_bwd = LstmParams::init(arch.char_dim, arch.char_hidden, rng);
  p.word_fwd = LstmParams::init(arch.token_dim(), arch.word_hidden, rng);
  p.word_bwd = LstmParams::init(arch.token_dim(), arch.word_hidden, rng);
  p.projection = glorot(arch.tag_count, 2 * arch.word_hidden, rng);
  p.projection_bias = Tensor({arch.tag_count});
  p.crf = CrfParams::zeros(arch.tag_count);
  return p;
}

std::vector<Tensor*> ModelParameters::dense_tensors() {
  return {&char_fwd.input_weights, &char_fwd.hidden_weights, &char_fwd.bias,
          &char_bwd.input_weights, &char_bwd.hidden_weights, &char_bwd.bias,
          &word_fwd.input_weights, &word_fwd.hidden_weights, &word_fwd.bias,
          &word_bwd.input_weights, &word_bwd.hidden_weights, &word_bwd.bias,
          &projection,             &projection_bias,         &crf.transitions,
          &crf.start,              &crf.stop};
}

std::vector<const Tensor*> ModelParameters::dense_tensors() const {
  auto mut = const_cast<ModelParameters*>(this)->dense_tensors();
  return {mut.begin(), mut.end()};
}

const std::vector<std::string>& ModelParameters::dense_tensor_names() {
  static const std::vector<std::string> names = {
      "char_fwd.input_weights", "char_fwd.hidden_weights", "char_fwd.bias",
      "char_bwd.input_weights", "char_bwd.hidden_weights", "char_bwd.bias",
      "word_fwd.input_weights", "word_fwd.hidden_weights", "word_fwd.bias",
      "word_bwd.input_weights", "word_bwd.hidden_weights", "word_bwd.bias",
      "projection",             "projection_bias",         "crf.transitions",
      "crf.start",              "crf.stop"};
  return names;
}

bool operator==(const ModelParameters& a, const ModelParameters& b) {
  if (a.words.matrix != b.words.matrix || a.chars.matrix != b.chars.matrix ||
      a.words.weights != b.words.weights || a.chars.weights != b.chars.weights) {
    return false;
  }
  const auto ta = a.dense_tensors();
  const auto tb = b.dense_tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (*ta[i] != *tb[i]) return false;
  }
  return true;
}

InputStats InputStats::compute(const ModelParameters& params) {
  return InputStats{compute_stats(params.words), compute_stats(params.chars)};
}

std::size_t SentenceInput::dimension() const {
  std::size_t d = 0;
  for (const Tensor& w : word_vectors) d += w.size();
  for (const auto& cs : char_vectors) {
    for (const Tensor& c : cs) d += c.size();
  }
  return d;
}

Tensor SentenceInput::flatten() const {
  Tensor out({dimension()});
  std::size_t offset = 0;
  auto put = [&](const Tensor& t) {
    std::copy(t.data().begin(), t.data().end(), out.data().begin() + offset);
    offset += t.size();
  };
  for (const Tensor& w : word_vectors) put(w);
  for (const auto& cs : char_vectors) {
    for (const Tensor& c : cs) put(c);
  }
  return out;
}

SentenceInput SentenceInput::shifted(const Tensor& delta) const {
  if (delta.size() != dimension()) {
    throw ShapeError("shift_input", Shape{dimension()}, delta.shape());
  }
  SentenceInput out = *this;
  std::size_t offset = 0;
  auto bump = [&](Tensor& t) {
    for (std::size_t j = 0; j < t.size(); ++j) t[j] += delta[offset + j];
    offset += t.size();
  };
  for (Tensor& w : out.word_vectors) bump(w);
  for (auto& cs : out.char_vectors) {
    for (Tensor& c : cs) bump(c);
  }
  return out;
}

SentenceInput prepare_input(const Sentence& sentence, const Vocab& vocab,
                            const ModelParameters& params, const InputStats& stats) {
  SentenceInput in;
  for (const Token& token : sentence.tokens) {
    if (token.form.empty()) throw std::invalid_argument("empty word");
    const std::size_t wid = vocab.word_id(token.form);
    in.word_ids.push_back(wid);
    in.word_vectors.push_back(normalized_row(params.words, stats.words, wid));
    std::vector<std::size_t> cids = vocab.char_ids(token.form);
    std::vector<Tensor> cvecs;
    cvecs.reserve(cids.size());
    for (std::size_t cid : cids) {
      cvecs.push_back(normalized_row(params.chars, stats.chars, cid));
    }
    in.char_ids.push_back(std::move(cids));
    in.char_vectors.push_back(std::move(cvecs));
  }
  return in;
}

DropoutMasks DropoutMasks::ones(std::size_t length, const TaggerArchitecture& arch) {
  DropoutMasks m;
  m.inputs.assign(length, Tensor({arch.token_dim()}, 1.0));
  m.outputs.assign(length, Tensor({2 * arch.word_hidden}, 1.0));
  return m;
}

DropoutMasks DropoutMasks::sample(std::size_t length, const TaggerArchitecture& arch,
                                  double rate, std::mt19937_64& rng) {
  DropoutMasks m = ones(length, arch);
  if (rate <= 0.0) return m;
  std::bernoulli_distribution keep(1.0 - rate);
  const double kept = 1.0 / (1.0 - rate);
  auto fill = [&](Tensor& t) {
    for (double& v : t.data()) v = keep(rng) ? kept : 0.0;
  };
  for (Tensor& t : m.inputs) fill(t);
  for (Tensor& t : m.outputs) fill(t);
  return m;
}

ModelVars ModelVars::on(Tape& tape, const ModelParameters& params) {
  return ModelVars{LstmVars::on(tape, params.char_fwd),
                   LstmVars::on(tape, params.char_bwd),
                   LstmVars::on(tape, params.word_fwd),
                   LstmVars::on(tape, params.word_bwd),
                   tape.parameter(params.projection),
                   tape.parameter(params.projection_bias),
                   CrfVars::on(tape, params.crf)};
}

std::vector<Var> ModelVars::dense_vars() const {
  return {char_fwd.input_weights, char_fwd.hidden_weights, char_fwd.bias,
          char_bwd.input_weights, char_bwd.hidden_weights, char_bwd.bias,
          word_fwd.input_weights, word_fwd.hidden_weights, word_fwd.bias,
          word_bwd.input_weights, word_bwd.hidden_weights, word_bwd.bias,
          projection,             projection_bias,         crf.transitions,
          crf.start,              crf.stop};
}

Var char_representation(std::span<const Var> chars, const LstmVars& forward,
                        const LstmVars& backward) {
  if (chars.empty()) throw std::invalid_argument("char_representation: empty word");
  Tape& tape = *chars.front().tape();
  const Var zf = tape.constant(Tensor({forward.hidden}));
  LstmState fwd{zf, zf};
  for (const Var& c : chars) fwd = lstm_cell(c, fwd.h, fwd.c, forward);
  const Var zb = tape.constant(Tensor({backward.hidden}));
  LstmState bwd{zb, zb};
  for (std::size_t i = chars.size(); i-- > 0;) bwd = lstm_cell(chars[i], bwd.h, bwd.c, backward);
  const Var parts[] = {fwd.h, bwd.h};
  return concat(parts);
}

std::vector<Var> EncodedSentence::input_leaves() const {
  std::vector<Var> out(word_leaves.begin(), word_leaves.end());
  for (const auto& cs : char_leaves) out.insert(out.end(), cs.begin(), cs.end());
  return out;
}

EncodedSentence encode_sentence(Tape& tape, const SentenceInput& input,
                                const ModelVars& vars,
                                const TaggerArchitecture& arch,
                                const DropoutMasks& masks) {
  const std::size_t n = input.size();
  if (n == 0) throw std::invalid_argument("encode_sentence: empty sentence");
  if (masks.inputs.size() != n || masks.outputs.size() != n) {
    throw std::invalid_argument("encode_sentence: dropout masks do not match length");
  }
  EncodedSentence enc;
  std::vector<Var> tokens;
  tokens.reserve(n);
  for (std::size_t t = 0; t < n; ++t) enc.word_leaves.push_back(tape.input(input.word_vectors[t]));
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<Var> chars;
    for (const Tensor& c : input.char_vectors[t]) chars.push_back(tape.input(c));
    const Var rep = char_representation(chars, vars.char_fwd, vars.char_bwd);
    const Var parts[] = {enc.word_leaves[t], rep};
    tokens.push_back(dropout(concat(parts), masks.inputs[t]));
    enc.char_leaves.push_back(std::move(chars));
  }
  if (tokens.front().shape() != Shape{arch.token_dim()}) {
    throw ShapeError("encode_sentence", Shape{arch.token_dim()}, tokens.front().shape());
  }

  const Var zf = tape.constant(Tensor({arch.word_hidden}));
  std::vector<Var> fwd(n);
  LstmState state{zf, zf};
  for (std::size_t t = 0; t < n; ++t) {
    state = lstm_cell(tokens[t], state.h, state.c, vars.word_fwd);
    fwd[t] = state.h;
  }
  std::vector<Var> bwd(n);
  state = LstmState{zf, zf};
  for (std::size_t t = n; t-- > 0;) {
    state = lstm_cell(tokens[t], state.h, state.c, vars.word_bwd);
    bwd[t] = state.h;
  }
  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Var parts[] = {fwd[t], bwd[t]};
    const Var out = dropout(concat(parts), masks.outputs[t]);
    rows.push_back(add(matmul(vars.projection, out), vars.projection_bias));
  }
  enc.emissions = stack(rows);
  return enc;
}

EncodedSentence encode_sentence(Tape& tape, const Sentence& sentence,
                                const Model& model, const InputStats& stats,
                                const ModelVars& vars, const DropoutMasks& masks) {
  const SentenceInput input = prepare_input(sentence, model.vocab, model.params, stats);
  return encode_sentence(tape, input, vars, model.arch, masks);
}

Tensor compute_emissions(const Model& model, const InputStats& stats,
                         const Sentence& sentence) {
  Tape tape;
  const ModelVars vars = ModelVars::on(tape, model.params);
  const EncodedSentence enc =
      encode_sentence(tape, sentence, model, stats, vars,
                      DropoutMasks::ones(sentence.size(), model.arch));
  return enc.emissions.value();
}

Tensor flatten_input_gradient(const GradientMap& grads,
                              const EncodedSentence& encoded) {
  const std::vector<Var> leaves = encoded.input_leaves();
  std::size_t d = 0;
  for (const Var& v : leaves) d += v.value().size();
  Tensor out({d});
  std::size_t offset = 0;
  for (const Var& v : leaves) {
    const Tensor& g = grads[v];
    std::copy(g.data().begin(), g.data().end(), out.data().begin() + offset);
    offset += g.size();
  }
  return out;
}

Gradients Gradients::zeros_like(const ModelParameters& params) {
  Gradients g;
  for (const Tensor* t : params.dense_tensors()) g.dense.emplace_back(t->shape());
  return g;
}

void Gradients::add_scaled(double factor, const Gradients& other) {
  if (dense.empty()) {
    for (const Tensor& t : other.dense) dense.emplace_back(t.shape());
  }
  for (std::size_t i = 0; i < dense.size(); ++i) dense[i].axpy(factor, other.dense[i]);
  add_rows(words, other.words, factor);
  add_rows(chars, other.chars, factor);
}

void Gradients::scale(double factor) {
  for (Tensor& t : dense) {
    for (double& v : t.data()) v *= factor;
  }
  for (auto* rows : {&words, &chars}) {
    for (auto& [id, values] : *rows) {
      for (double& v : values) v *= factor;
    }
  }
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const Tensor& t : dense) s += t.squared_norm();
  for (const auto* rows : {&words, &chars}) {
    for (const auto& [id, values] : *rows) {
      for (double v : values) s += v * v;
    }
  }
  return s;
}

bool Gradients::all_finite() const {
  return std::isfinite(squared_norm());
}

void collect_gradients(const GradientMap& grads, const ModelVars& vars,
                       const EncodedSentence& encoded, const SentenceInput& input,
                       const InputStats& stats, Gradients& out) {
  const std::vector<Var> dense = vars.dense_vars();
  if (out.dense.size() != dense.size()) {
    out.dense.clear();
    for (const Var& v : dense) out.dense.emplace_back(v.shape());
  }
  for (std::size_t i = 0; i < dense.size(); ++i) out.dense[i].axpy(1.0, grads[dense[i]]);

  for (std::size_t t = 0; t < input.size(); ++t) {
    const Tensor& g = grads[encoded.word_leaves[t]];
    accumulate_raw_gradient(stats.words, g.data(),
                            row_slot(out.words, input.word_ids[t], g.size()));
    for (std::size_t k = 0; k < input.char_ids[t].size(); ++k) {
      const Tensor& gc = grads[encoded.char_leaves[t][k]];
      accumulate_raw_gradient(stats.chars, gc.data(),
                              row_slot(out.chars, input.char_ids[t][k], gc.size()));
    }
  }
}

}  // namespace advtag
