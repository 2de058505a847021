#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "advtag/adversarial.hpp"
#include "advtag/network.hpp"

namespace advtag {

enum class StatsRefresh { kPerBatch, kPerEpoch };
enum class GradientReduction { kSum, kMean };

struct TrainConfig {
  std::size_t batch_size = 10;
  double momentum = 0.9;
  double learning_rate = 0.01;
  double decay_rate = 0.05;
  double clip_threshold = 5.0;
  double dropout = 0.5;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  StatsRefresh stats_refresh = StatsRefresh::kPerBatch;
  GradientReduction reduction = GradientReduction::kSum;

  void validate() const;
};

// Aborts training on NaN/Inf losses.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t epoch, std::size_t sentence);
  std::size_t epoch() const { return epoch_; }
  std::size_t sentence() const { return sentence_; }

 private:
  std::size_t epoch_;
  std::size_t sentence_;
};

// Momentum buffers shaped like the parameters.
struct Velocity {
  std::vector<Tensor> dense;
  Tensor words;
  Tensor chars;

  static Velocity zeros_like(const ModelParameters& params);
};

struct TrainState {
  std::size_t epoch = 0;
  Velocity velocity;
  double best_dev_accuracy = -1.0;
  std::size_t epochs_since_improvement = 0;
  std::mt19937_64 rng;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;  // mean per sentence
  double dev_loss = 0.0;    // mean NLL per sentence, no dropout
  double dev_accuracy = 0.0;
  bool improved = false;
  double seconds = 0.0;
};

struct TrainResult {
  Model best_model;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0.0;
  double best_dev_loss = 0.0;  // minimum over epochs
};

// lr0 / (1 + decay * epoch)
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

// Rescales all gradients when their global L2 norm exceeds `threshold`.
// Returns the norm before clipping.
double clip_gradients(Gradients& grads, double threshold);

// v <- momentum * v - lr * grad; param <- param + v. Embedding tables marked
// non-trainable are left untouched.
void sgd_momentum_step(ModelParameters& params, const Gradients& grads,
                       Velocity& velocity, double lr, double momentum);

// Fresh model for a training corpus; word table from `pretrained` if given.
Model initialize_model(const Corpus& train, TaggerArchitecture arch,
                       std::uint64_t seed, std::int64_t min_count = 1,
                       const std::optional<std::filesystem::path>& pretrained = {},
                       bool char_frequency_weighting = false);

// Seeds derived from the run seed for each random stream.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

struct DevMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};
DevMetrics evaluate_dev(const Model& model, const Corpus& dev);

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(Model model, const Corpus& train_corpus, const Corpus& dev,
                  const TrainConfig& cfg, const AdvConfig& adv,
                  const EpochCallback& on_epoch = {});

// Predicted tags for every sentence (Viterbi, no dropout).
Corpus tag_corpus(const Model& model, const Corpus& corpus);

}  // namespace advtag
