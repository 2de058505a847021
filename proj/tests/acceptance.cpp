// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "advtag/checkpoint.hpp"
#include "advtag/eval.hpp"
#include "advtag/synthetic.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace advtag;
namespace fs = std::filesystem;

namespace {

const fs::path kData = ADVTAG_TEST_DATA;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int run_cli(const std::string& args, const fs::path& stdout_file = "/dev/null") {
  const std::string cmd = std::string(ADVTAGGER_BIN) + " " + args + " >" + stdout_file.string() +
                          " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string checkpoint_bytes(const Model& m) {
  std::ostringstream out;
  save_model(m, out);
  return out.str();
}

// The synthetic task used by the learning criteria.
struct SyntheticSplits {
  Corpus train, dev, test;
};

SyntheticSplits synthetic_splits(std::size_t n_train) {
  const HmmSpec spec = zipfian_spec(8, 500, 1);
  const Corpus all = generate(spec, 2000 + 200 + 200, 25);
  SyntheticSplits s;
  s.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.dev.assign(all.begin() + 2000, all.begin() + 2200);
  s.test.assign(all.begin() + 2200, all.end());
  return s;
}

TaggerArchitecture desk_arch() {
  TaggerArchitecture a;
  a.char_dim = 10;
  a.char_hidden = 16;
  a.word_dim = 32;
  a.word_hidden = 32;
  return a;
}

Outcome gradient_integrity() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  std::string where;
  std::size_t coords = 0;
  const int instances = 24;
  for (int i = 0; i < instances; ++i) {
    const std::size_t tags = 2 + static_cast<std::size_t>(i % 3);
    const Corpus train = support::random_corpus(3, 5, tags, rng);
    const Model m = support::random_model(train, 200 + static_cast<std::uint64_t>(i));
    const Sentence s = support::random_sentence(1 + rng() % 5, tags, rng);
    const support::GradientAudit a = support::audit_gradients(m, s, 1e-5);
    coords += a.coordinates;
    if (a.max_error > worst) {
      worst = a.max_error;
      where = a.worst;
    }
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 60.0,
          std::to_string(instances) + " instances, " + std::to_string(coords) +
              " coordinates, max rel err " + fmt("%.2e", worst) + " (" + where + "), " +
              fmt("%.1fs", secs)};
}

Outcome crf_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(102);
  std::normal_distribution<double> n(0.0, 1.5);
  double worst_z = 0.0, worst_norm = 0.0;
  int viterbi_ok = 0, instances = 0;
  while (instances < 100) {
    const std::size_t k = 1 + rng() % 5;
    const std::size_t len = 1 + rng() % 6;
    if (std::pow(double(k), double(len)) > 1024) continue;
    ++instances;
    Tensor e(Shape{len, k});
    for (double& v : e.data()) v = n(rng);
    CrfParams crf = CrfParams::zeros(k);
    for (double& v : crf.transitions.data()) v = n(rng);
    for (double& v : crf.start.data()) v = n(rng);
    for (double& v : crf.stop.data()) v = n(rng);

    worst_z = std::max(worst_z, std::abs(log_partition(e, crf) - oracle::log_partition(e, crf)));
    double mass = 0.0;
    for (const auto& path : oracle::all_paths(k, len)) mass += std::exp(-nll(e, crf, path));
    worst_norm = std::max(worst_norm, std::abs(mass - 1.0));
    const auto [best, score] = oracle::best_path(e, crf);
    const ViterbiResult v = viterbi(e, crf);
    viterbi_ok += v.path == best && std::abs(v.score - score) < 1e-9;
  }
  const double secs = seconds_since(start);
  return {worst_z < 1e-8 && worst_norm < 1e-8 && viterbi_ok == 100 && secs < 60.0,
          "|logZ - enum| " + fmt("%.1e", worst_z) + ", |sum exp(-L) - 1| " +
              fmt("%.1e", worst_norm) + ", viterbi " + std::to_string(viterbi_ok) + "/100, " +
              fmt("%.2fs", secs)};
}

Outcome perturbation_contract() {
  std::mt19937_64 rng(103);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> alpha(0.0, 1.0);
  double worst_norm = 0.0, worst_cos = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 1 + rng() % 500;
    Tensor g(Shape{d});
    const double scale = std::pow(10.0, -6.0 + 12.0 * alpha(rng));
    for (double& v : g.data()) v = scale * n(rng);
    const double a = alpha(rng);
    const Perturbation p = fgm_perturbation(g, a, d);
    const double target = a * std::sqrt(double(d));
    worst_norm = std::max(worst_norm, std::abs(std::sqrt(p.eta.squared_norm()) - target));
    if (a > 0) {
      worst_cos =
          std::max(worst_cos, std::abs(oracle::cosine(p.eta.data(), g.data()) - 1.0));
    }
  }
  bool zero_ok = true;
  for (std::size_t d : {1u, 7u, 410u}) {
    Tensor g(Shape{d});
    if (d == 7) g[3] = 1e-13;
    const Perturbation p = fgm_perturbation(g, 0.05, d);
    zero_ok = zero_ok && p.zero_gradient && p.eta.squared_norm() == 0.0 && p.eta.all_finite();
  }
  return {worst_norm < 1e-9 && worst_cos < 1e-9 && zero_ok,
          "| |eta| - alpha sqrt(D) | " + fmt("%.1e", worst_norm) + ", |cos - 1| " +
              fmt("%.1e", worst_cos) + ", zero-gradient flag " + (zero_ok ? "ok" : "broken")};
}

Outcome first_order_ascent() {
  const SyntheticSplits s = synthetic_splits(200);
  TaggerArchitecture arch = support::tiny_arch();
  arch.char_dim = 6;
  arch.char_hidden = 6;
  arch.word_dim = 12;
  arch.word_hidden = 12;
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.dropout = 0.0;
  const Model m = train(initialize_model(s.train, arch, 4), s.train, s.dev, cfg, {}).best_model;
  const InputStats stats = InputStats::compute(m.params);

  int good = 0;
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Sentence& sent = s.test[static_cast<std::size_t>(i)];
    const SentenceInput in = prepare_input(sent, m.vocab, m.params, stats);
    const auto tags = tag_ids(sent, m.vocab);
    const DropoutMasks masks = DropoutMasks::ones(sent.size(), m.arch);
    const Tensor g = input_gradient(m, stats, sent);
    const Perturbation p = fgm_perturbation(g, 1e-4, in.dimension());
    const double rise =
        (loss_at(m, in.shifted(p.eta), tags, masks) - loss_at(m, in, tags, masks)) / p.epsilon;
    const double rel = std::abs(rise / std::sqrt(g.squared_norm()) - 1.0);
    worst = std::max(worst, rel);
    good += rel <= 0.1;
  }
  return {good >= 45, std::to_string(good) + "/50 within 10%, worst deviation " +
                          fmt("%.3f", worst)};
}

Outcome baseline_equivalence() {
  const SyntheticSplits s = synthetic_splits(60);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.seed = 17;
  const Model init = initialize_model(s.train, support::tiny_arch(), 17);
  TaggerArchitecture with_dropout = support::tiny_arch();
  with_dropout.dropout = 0.5;
  const Model init_d = initialize_model(s.train, with_dropout, 17);
  const Corpus dev(s.dev.begin(), s.dev.begin() + 40);
  const bool same = checkpoint_bytes(train(init_d, s.train, dev, cfg, {}).best_model) ==
                    checkpoint_bytes(train(init_d, s.train, dev, cfg, {0.0, 0.5, true}).best_model);
  const bool same_g = checkpoint_bytes(train(init, s.train, dev, cfg, {}).best_model) ==
                      checkpoint_bytes(train(init, s.train, dev, cfg, {0.0, 0.3, true}).best_model);
  return {same && same_g, std::string("gamma 0.5 ") + (same ? "identical" : "DIFFERENT") +
                              ", gamma 0.3 " + (same_g ? "identical" : "DIFFERENT")};
}

Outcome normalization() {
  const SyntheticSplits s = synthetic_splits(300);
  double worst = 0.0;
  auto check = [&](const EmbeddingTable& t) {
    const NormalizationStats st = compute_stats(t);
    double total = 0.0;
    for (double w : t.weights) total += w;
    for (std::size_t j = 0; j < t.dim(); ++j) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t r = 0; r < t.rows(); ++r) {
        const double z = normalized_row(t, st, r)[j];
        mean += t.weights[r] * z;
        sq += t.weights[r] * z * z;
      }
      mean /= total;
      worst = std::max({worst, std::abs(mean), std::abs(sq / total - mean * mean - 1.0)});
    }
  };
  for (std::uint64_t seed : {1, 2, 3}) {
    const Model m = initialize_model(s.train, desk_arch(), seed, 1, {}, seed == 3);
    check(m.params.words);
    check(m.params.chars);
  }
  TrainConfig cfg;
  cfg.max_epochs = 1;
  const Model trained =
      train(initialize_model(s.train, support::tiny_arch(), 5), s.train, s.dev, cfg, {}).best_model;
  check(trained.params.words);
  check(trained.params.chars);
  return {worst < 1e-10, "max |moment error| " + fmt("%.1e", worst)};
}

Outcome desk_learning() {
  const auto start = Clock::now();
  const SyntheticSplits s = synthetic_splits(2000);
  TrainConfig cfg;
  cfg.max_epochs = 30;
  cfg.threads = 1;
  const TrainResult r = train(initialize_model(s.train, desk_arch(), 1), s.train, s.dev, cfg, {});
  const double acc = token_accuracy(s.test, tag_corpus(r.best_model, s.test));
  const double secs = seconds_since(start);
  return {acc >= 0.97 && r.log.size() <= 30 && secs < 1800.0,
          "test accuracy " + format_percent(acc) + " after " + std::to_string(r.log.size()) +
              " epochs (best " + std::to_string(r.best_epoch) + "), " + fmt("%.0fs", secs)};
}

Outcome regularization_trend() {
  const auto start = Clock::now();
  const SyntheticSplits s = synthetic_splits(200);
  TrainConfig cfg;
  cfg.max_epochs = 30;
  double base = 0.0, adv = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    const Model init = initialize_model(s.train, desk_arch(), seed);
    const double b = train(init, s.train, s.dev, cfg, {}).best_dev_loss;
    const double a = train(init, s.train, s.dev, cfg, {0.05, 0.5, true}).best_dev_loss;
    base += b / 5.0;
    adv += a / 5.0;
    per_seed += fmt(" %.3f", b) + fmt("/%.3f", a);
  }
  return {adv <= base, "mean best-dev NLL adversarial " + fmt("%.4f", adv) + " vs baseline " +
                           fmt("%.4f", base) + " (base/adv:" + per_seed + "), " +
                           fmt("%.0fs", seconds_since(start))};
}

std::vector<std::string> random_iobes(std::size_t n, std::mt19937_64& rng) {
  static const std::vector<std::string> types = {"NP", "VP", "PP"};
  std::vector<std::string> out;
  while (out.size() < n) {
    const std::string& ty = types[rng() % types.size()];
    const std::size_t room = n - out.size();
    const unsigned kind = rng() % 3;
    if (kind == 0) {
      out.push_back("O");
    } else if (kind == 1 || room == 1) {
      out.push_back("S-" + ty);
    } else {
      const std::size_t len = 2 + rng() % (room - 1);
      out.push_back("B-" + ty);
      for (std::size_t i = 1; i + 1 < len; ++i) out.push_back("I-" + ty);
      out.push_back("E-" + ty);
    }
  }
  return out;
}

Outcome metric_oracles() {
  std::mt19937_64 rng(109);
  int f1_ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    const auto gold = random_iobes(n, rng);
    const auto pred = trial % 4 == 0 ? gold : random_iobes(n, rng);
    const auto g = oracle::iobes_chunks(gold);
    const auto p = oracle::iobes_chunks(pred);
    std::size_t matched = 0;
    for (const auto& c : p) matched += std::count(g.begin(), g.end(), c);
    const double pr = p.empty() ? 0.0 : double(matched) / double(p.size());
    const double rc = g.empty() ? 0.0 : double(matched) / double(g.size());
    const double f1 = pr + rc > 0 ? 2 * pr * rc / (pr + rc) : 0.0;
    const ChunkScores s = chunk_f1({gold}, {pred}, ChunkScheme::kIobes);
    f1_ok += s.matched == matched && s.gold_spans == g.size() &&
             s.predicted_spans == p.size() && std::abs(s.f1 - f1) < 1e-12;
  }

  // Partitions: every test token lands in exactly one frequency bucket, and
  // every adjacent pair contributes two neighbor observations.
  int partitions_ok = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Corpus train_c = support::random_corpus(20, 8, 3, rng);
    const Corpus gold = support::random_corpus(10, 8, 3, rng);
    Corpus pred = gold;
    for (Sentence& sent : pred) {
      for (Token& t : sent.tokens) {
        if (rng() % 3 == 0) t.tag = "t" + std::to_string(rng() % 3);
      }
    }
    const Vocab v = Vocab::build(train_c);
    std::size_t tokens = 0, pairs = 0;
    std::vector<std::size_t> expect(4, 0), expect_correct(4, 0);
    auto bucket_of = [&](const std::string& w) {
      const std::int64_t f = v.frequency(w);
      return f == 0 ? 0u : f < 10 ? 1u : f < 100 ? 2u : 3u;
    };
    for (std::size_t i = 0; i < gold.size(); ++i) {
      tokens += gold[i].size();
      pairs += gold[i].size() - 1;
      for (std::size_t t = 0; t < gold[i].size(); ++t) {
        const std::size_t b = bucket_of(gold[i].tokens[t].form);
        ++expect[b];
        expect_correct[b] += gold[i].tokens[t].tag == pred[i].tokens[t].tag;
      }
    }
    const BucketReport fb = frequency_buckets(v, gold, pred);
    const BucketReport nb = neighbor_accuracy(v, gold, pred);
    bool ok = fb.total == tokens && nb.total == 2 * pairs && fb.buckets.size() == 4;
    std::size_t fsum = 0, nsum = 0;
    for (std::size_t b = 0; b < 4 && ok; ++b) {
      ok = fb.buckets[b].count == expect[b] && fb.buckets[b].correct == expect_correct[b];
      fsum += fb.buckets[b].count;
      nsum += nb.buckets[b].count;
    }
    partitions_ok += ok && fsum == tokens && nsum == nb.total;
  }

  int tight_ok = 0;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Corpus c(1);
    const std::size_t words = 2 + rng() % 9;
    for (std::size_t i = 0; i < words; ++i) c[0].tokens.push_back({"w" + std::to_string(i), "T"});
    const Vocab v = Vocab::build(c);
    EmbeddingTable t{Tensor(Shape{v.word_count(), 1 + rng() % 6}), v.word_weights(), true};
    for (double& x : t.matrix.data()) x = n(rng);
    const TightnessReport r = cluster_tightness(t, nullptr, v, c);
    std::vector<std::vector<double>> members;
    for (const Token& tok : c[0].tokens) {
      const auto row = t.matrix.row(v.word_id(tok.form));
      members.emplace_back(row.begin(), row.end());
    }
    tight_ok += r.clusters.size() == 1 && r.clusters[0].members == words &&
                std::abs(r.clusters[0].tightness - oracle::mean_pairwise_cosine(members)) < 1e-12;
  }
  return {f1_ok == 200 && partitions_ok == 50 && tight_ok == 50,
          "chunk F1 " + std::to_string(f1_ok) + "/200, partitions " +
              std::to_string(partitions_ok) + "/50, tightness " + std::to_string(tight_ok) + "/50"};
}

Outcome reproducibility(const fs::path& work) {
  const fs::path data = work / "repro";
  if (run_cli("generate --out " + data.string() + " --train 150 --dev 40 --test 10 --seed 5") != 0) {
    return {false, "generate failed"};
  }
  std::ofstream(work / "repro.json")
      << R"({"word_dim": 12, "char_dim": 6, "char_hidden": 6, "word_hidden": 12,
             "max_epochs": 3, "seed": 9, "adversarial_enabled": true, "threads": 1})";
  const std::string corpus =
      " --train " + (data / "train.conllu").string() + " --dev " + (data / "dev.conllu").string();
  if (run_cli("train --config " + (work / "repro.json").string() + corpus + " --out " +
              (work / "r0").string()) != 0) {
    return {false, "initial train failed"};
  }
  const std::string manifest = (work / "r0" / "manifest.json").string();
  if (run_cli("train --manifest " + manifest + " --out " + (work / "r1").string()) != 0 ||
      run_cli("train --manifest " + manifest + " --out " + (work / "r2").string()) != 0) {
    return {false, "train --manifest failed"};
  }
  const bool logs = slurp(work / "r1" / "epochs.jsonl") == slurp(work / "r2" / "epochs.jsonl") &&
                    !slurp(work / "r1" / "epochs.jsonl").empty();
  const bool ckpt = slurp(work / "r1" / "model.ckpt") == slurp(work / "r2" / "model.ckpt");
  const bool orig = slurp(work / "r0" / "model.ckpt") == slurp(work / "r1" / "model.ckpt");
  return {logs && ckpt, std::string("epoch logs ") + (logs ? "identical" : "DIFFER") +
                            ", checkpoints " + (ckpt ? "identical" : "DIFFER") +
                            (orig ? " (and equal to the original run)" : "")};
}

Outcome end_to_end(const fs::path& work) {
  std::ofstream(work / "ud.json")
      << R"({"word_dim": 16, "char_dim": 8, "char_hidden": 8, "word_hidden": 16,
             "max_epochs": 4, "seed": 2})";
  if (run_cli("train --config " + (work / "ud.json").string() + " --pretrained " +
              (kData / "embeddings.txt").string() + " --train " +
              (kData / "ud_train.conllu").string() + " --dev " +
              (kData / "ud_dev.conllu").string() + " --out " + (work / "ud").string()) != 0) {
    return {false, "train failed"};
  }
  const fs::path report = work / "ud_report.txt";
  if (run_cli("eval --model " + (work / "ud" / "model.ckpt").string() + " --gold " +
                  (kData / "ud_test.conllu").string() + " --buckets --neighbors --tightness",
              report) != 0) {
    return {false, "eval failed"};
  }
  const std::string text = slurp(report);
  bool ok = true;
  for (const char* needle : {"Frequency", "Neighbors of", "POS Cluster", "1-10", "10-100", "100-",
                             "# Tokens", "Avg."}) {
    ok = ok && text.find(needle) != std::string::npos;
  }
  return {ok, std::string("eval report ") + (ok ? "has" : "is MISSING") +
                  " the frequency, neighbor and tightness tables"};
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "advtag_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient integrity", gradient_integrity},
      {"CRF oracle equivalence", crf_oracle},
      {"perturbation contract", perturbation_contract},
      {"first-order ascent", first_order_ascent},
      {"baseline equivalence at alpha 0", baseline_equivalence},
      {"embedding normalization", normalization},
      {"desk-scale learning", desk_learning},
      {"regularization trend", regularization_trend},
      {"metric oracles", metric_oracles},
      {"reproducibility from manifest", [&] { return reproducibility(work); }},
      {"end-to-end train and eval", [&] { return end_to_end(work); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first
              << ": " << o.detail << std::endl;
  }
  fs::remove_all(work);
  return failures == 0 ? 0 : 1;
}
