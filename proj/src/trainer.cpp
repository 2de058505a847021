#include "advtag/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <numeric>
#include <thread>

#include "advtag/crf.hpp"

namespace advtag {

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(decay_rate >= 0.0)) throw std::invalid_argument("decay_rate must be >= 0");
  if (!(clip_threshold > 0.0)) throw std::invalid_argument("clip threshold must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("dropout must lie in [0, 1)");
  }
  if (max_epochs == 0) throw std::invalid_argument("max_epochs must be >= 1");
  if (patience == 0) throw std::invalid_argument("patience must be >= 1");
  if (threads == 0) throw std::invalid_argument("threads must be >= 1");
}

TrainingError::TrainingError(const std::string& what, std::size_t epoch,
                             std::size_t sentence)
    : std::runtime_error(what + " (epoch " + std::to_string(epoch) +
                         ", sentence " + std::to_string(sentence) + ")"),
      epoch_(epoch),
      sentence_(sentence) {}

Velocity Velocity::zeros_like(const ModelParameters& params) {
  Velocity v;
  for (const Tensor* t : params.dense_tensors()) v.dense.emplace_back(t->shape());
  v.words = Tensor(params.words.matrix.shape());
  v.chars = Tensor(params.chars.matrix.shape());
  return v;
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.learning_rate / (1.0 + cfg.decay_rate * static_cast<double>(epoch));
}

double clip_gradients(Gradients& grads, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("clip threshold must be > 0");
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > threshold) grads.scale(threshold / norm);
  return norm;
}

namespace {

void momentum_update(std::span<double> param, std::span<double> velocity,
                     const double* grad, double lr, double momentum) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad != nullptr ? grad[i] : 0.0;
    velocity[i] = momentum * velocity[i] - lr * g;
    param[i] += velocity[i];
  }
}

void table_update(EmbeddingTable& table, Tensor& velocity, const SparseRows& grads,
                  double lr, double momentum) {
  if (!table.trainable) return;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    auto it = grads.find(r);
    momentum_update(table.matrix.row(r), velocity.row(r),
                    it == grads.end() ? nullptr : it->second.data(), lr, momentum);
  }
}

}  // namespace

void sgd_momentum_step(ModelParameters& params, const Gradients& grads,
                       Velocity& velocity, double lr, double momentum) {
  auto tensors = params.dense_tensors();
  if (grads.dense.size() != tensors.size() || velocity.dense.size() != tensors.size()) {
    throw std::invalid_argument("sgd_momentum_step: gradient layout mismatch");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (grads.dense[i].shape() != tensors[i]->shape()) {
      throw ShapeError("sgd_momentum_step", tensors[i]->shape(), grads.dense[i].shape());
    }
    momentum_update(tensors[i]->data(), velocity.dense[i].data(),
                    grads.dense[i].data().data(), lr, momentum);
  }
  table_update(params.words, velocity.words, grads.words, lr, momentum);
  table_update(params.chars, velocity.chars, grads.chars, lr, momentum);
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

Model initialize_model(const Corpus& train, TaggerArchitecture arch,
                       std::uint64_t seed, std::int64_t min_count,
                       const std::optional<std::filesystem::path>& pretrained,
                       bool char_frequency_weighting) {
  if (train.empty()) throw std::invalid_argument("training corpus is empty");
  Model model;
  model.vocab = Vocab::build(train, min_count);
  arch.tag_count = model.vocab.tag_count();
  model.arch = arch;
  std::mt19937_64 rng = make_rng(seed, 0);
  model.params = ModelParameters::init(arch, model.vocab, rng, char_frequency_weighting);
  if (pretrained) {
    std::mt19937_64 emb_rng = make_rng(seed, 2);
    model.params.words = load_pretrained(*pretrained, model.vocab, arch.word_dim, emb_rng);
  }
  return model;
}

DevMetrics evaluate_dev(const Model& model, const Corpus& dev) {
  const InputStats stats = InputStats::compute(model.params);
  double loss = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const Sentence& s : dev) {
    const Tensor emissions = compute_emissions(model, stats, s);
    const auto gold = tag_ids(s, model.vocab);
    loss += nll(emissions, model.params.crf, gold);
    const ViterbiResult best = viterbi(emissions, model.params.crf);
    for (std::size_t t = 0; t < gold.size(); ++t) correct += best.path[t] == gold[t];
    total += gold.size();
  }
  DevMetrics m;
  m.loss = dev.empty() ? 0.0 : loss / static_cast<double>(dev.size());
  m.accuracy = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  return m;
}

Corpus tag_corpus(const Model& model, const Corpus& corpus) {
  const InputStats stats = InputStats::compute(model.params);
  Corpus out = corpus;
  for (Sentence& s : out) {
    const ViterbiResult best = viterbi(compute_emissions(model, stats, s), model.params.crf);
    for (std::size_t t = 0; t < s.size(); ++t) s.tokens[t].tag = model.vocab.tag(best.path[t]);
  }
  return out;
}

TrainResult train(Model model, const Corpus& train_corpus, const Corpus& dev,
                  const TrainConfig& cfg, const AdvConfig& adv,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  adv.validate();
  if (train_corpus.empty()) throw std::invalid_argument("training corpus is empty");
  if (dev.empty()) throw std::invalid_argument("development corpus is empty");
  model.arch.dropout = cfg.dropout;

  TrainState state;
  state.velocity = Velocity::zeros_like(model.params);
  state.rng = make_rng(cfg.seed, 1);

  TrainResult result;
  result.best_model = model;
  result.best_dev_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_corpus.size());
  std::iota(order.begin(), order.end(), 0);

  for (state.epoch = 0; state.epoch < cfg.max_epochs; ++state.epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = lr_schedule(state.epoch, cfg);
    std::shuffle(order.begin(), order.end(), state.rng);

    InputStats stats = InputStats::compute(model.params);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      if (cfg.stats_refresh == StatsRefresh::kPerBatch) {
        stats = InputStats::compute(model.params);
      }

      // Masks are drawn up front in example order so the random stream does
      // not depend on the thread count.
      std::vector<DropoutMasks> masks;
      for (std::size_t i = begin; i < end; ++i) {
        masks.push_back(DropoutMasks::sample(train_corpus[order[i]].size(), model.arch,
                                             cfg.dropout, state.rng));
      }
      std::vector<ExampleResult> results(end - begin);
      auto run = [&](std::size_t j) {
        const Sentence& s = train_corpus[order[begin + j]];
        results[j] = adv.enabled ? adversarial_example(model, stats, s, masks[j], adv)
                                 : clean_example(model, stats, s, masks[j]);
      };
      if (cfg.threads <= 1) {
        for (std::size_t j = 0; j < results.size(); ++j) run(j);
      } else {
        std::vector<std::thread> workers;
        const std::size_t nthreads = std::min(cfg.threads, results.size());
        for (std::size_t w = 0; w < nthreads; ++w) {
          workers.emplace_back([&, w] {
            for (std::size_t j = w; j < results.size(); j += nthreads) run(j);
          });
        }
        for (auto& t : workers) t.join();
      }

      Gradients batch = Gradients::zeros_like(model.params);
      for (std::size_t j = 0; j < results.size(); ++j) {
        if (!std::isfinite(results[j].loss) || !results[j].gradients.all_finite()) {
          throw TrainingError("non-finite training loss", state.epoch, order[begin + j]);
        }
        loss_sum += results[j].loss;
        batch.add_scaled(1.0, results[j].gradients);
      }
      if (cfg.reduction == GradientReduction::kMean) {
        batch.scale(1.0 / static_cast<double>(results.size()));
      }
      clip_gradients(batch, cfg.clip_threshold);
      sgd_momentum_step(model.params, batch, state.velocity, lr, cfg.momentum);
    }

    const DevMetrics dev_metrics = evaluate_dev(model, dev);
    if (!std::isfinite(dev_metrics.loss)) {
      throw TrainingError("non-finite development loss", state.epoch, 0);
    }
    EpochRecord rec;
    rec.epoch = state.epoch;
    rec.learning_rate = lr;
    rec.train_loss = loss_sum / static_cast<double>(train_corpus.size());
    rec.dev_loss = dev_metrics.loss;
    rec.dev_accuracy = dev_metrics.accuracy;
    rec.improved = dev_metrics.accuracy > state.best_dev_accuracy;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                      .count();
    result.best_dev_loss = std::min(result.best_dev_loss, dev_metrics.loss);
    if (rec.improved) {
      state.best_dev_accuracy = dev_metrics.accuracy;
      state.epochs_since_improvement = 0;
      result.best_model = model;
      result.best_epoch = state.epoch;
      result.best_dev_accuracy = dev_metrics.accuracy;
    } else {
      ++state.epochs_since_improvement;
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (state.epochs_since_improvement >= cfg.patience) break;
  }
  return result;
}

}  // namespace advtag
