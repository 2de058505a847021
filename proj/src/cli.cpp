#include "advtag/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "advtag/checkpoint.hpp"
#include "advtag/eval.hpp"
#include "advtag/synthetic.hpp"

#ifndef ADVTAG_BUILD_ID
#define ADVTAG_BUILD_ID "unknown"
#endif

namespace advtag {

using nlohmann::json;
namespace fs = std::filesystem;

const char* build_id() { return ADVTAG_BUILD_ID; }

namespace {

const std::set<std::string> kConfigKeys = {
    "seed",          "batch_size",        "momentum",
    "learning_rate", "decay_rate",        "clip_threshold",
    "dropout",       "max_epochs",        "patience",
    "threads",       "stats_refresh",     "gradient_reduction",
    "alpha",         "gamma",             "adversarial_enabled",
    "char_dim",      "char_hidden",       "word_dim",
    "word_hidden",   "min_count",         "pretrained_embeddings",
    "char_frequency_weighting",           "format",
    "token_col",     "tag_col",           "iobes"};

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw UsageError("config key '" + key + "': " + why);
}

void take_count(const json& j, const std::string& key, std::size_t& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<std::int64_t>() < 0)) {
    bad_key(key, "expected a non-negative integer");
  }
  out = v.get<std::size_t>();
}

void take_real(const json& j, const std::string& key, double& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number()) bad_key(key, "expected a number");
  out = j.at(key).get<double>();
}

void take_bool(const json& j, const std::string& key, bool& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_boolean()) bad_key(key, "expected true or false");
  out = j.at(key).get<bool>();
}

CorpusFormat parse_format(const std::string& s) {
  if (s == "conllu") return CorpusFormat::kConllu;
  if (s == "columns") return CorpusFormat::kColumns;
  throw UsageError("unknown corpus format '" + s + "' (expected conllu or columns)");
}

std::string format_name(CorpusFormat f) {
  return f == CorpusFormat::kConllu ? "conllu" : "columns";
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path absolute_path(const fs::path& p) { return fs::weakly_canonical(fs::absolute(p)); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool has_gold_tags(const Corpus& corpus) {
  for (const Sentence& s : corpus) {
    for (const Token& t : s.tokens) {
      if (!t.tag.empty() && t.tag != "_") return true;
    }
  }
  return false;
}

Corpus normalize_chunk_tags(Corpus corpus) {
  for (Sentence& s : corpus) {
    const auto tags = iobes_to_iob2(to_iobes(s.tags()));
    for (std::size_t i = 0; i < s.size(); ++i) s.tokens[i].tag = tags[i];
  }
  return corpus;
}

Corpus to_iobes_corpus(Corpus corpus) {
  for (Sentence& s : corpus) {
    const auto tags = to_iobes(s.tags());
    for (std::size_t i = 0; i < s.size(); ++i) s.tokens[i].tag = tags[i];
  }
  return corpus;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("advtagger");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("ADVTAGGER_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; only honor a real "off".
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::optional<std::string> config;
  std::optional<std::string> manifest;
  std::optional<std::string> train;
  std::optional<std::string> dev;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::optional<bool> adversarial;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> threads;
  std::optional<std::string> pretrained;
};

int cmd_train(const TrainArgs& a) {
  const auto t_start = std::chrono::steady_clock::now();
  RunManifest m;
  if (a.manifest) {
    if (a.config) throw UsageError("--config and --manifest are mutually exclusive");
    m = manifest_from_json(read_json_file(*a.manifest));
    if (a.train) m.train_path = *a.train;
    if (a.dev) m.dev_path = *a.dev;
  } else {
    if (!a.config) throw UsageError("train requires --config (or --manifest)");
    if (!a.train || !a.dev) throw UsageError("train requires --train and --dev");
    m.config = apply_config(RunConfig{}, read_json_file(*a.config));
    m.train_path = *a.train;
    m.dev_path = *a.dev;
  }
  RunConfig& cfg = m.config;
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.alpha) cfg.adv.alpha = *a.alpha;
  if (a.gamma) cfg.adv.gamma = *a.gamma;
  if (a.adversarial) cfg.adv.enabled = *a.adversarial;
  if (a.epochs) cfg.train.max_epochs = *a.epochs;
  if (a.threads) cfg.train.threads = *a.threads;
  if (a.pretrained) cfg.pretrained = *a.pretrained;
  try {
    cfg.train.validate();
    cfg.adv.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  m.train_path = absolute_path(m.train_path);
  m.dev_path = absolute_path(m.dev_path);
  if (cfg.pretrained) cfg.pretrained = absolute_path(*cfg.pretrained);
  const fs::path out_dir = absolute_path(a.out_dir);
  fs::create_directories(out_dir);
  m.checkpoint = out_dir / "model.ckpt";
  m.epoch_log = out_dir / "epochs.jsonl";
  m.build_id = build_id();

  Corpus train_corpus = read_corpus(m.train_path, cfg.layout);
  Corpus dev_corpus = read_corpus(m.dev_path, cfg.layout);
  if (cfg.iobes) {
    train_corpus = to_iobes_corpus(std::move(train_corpus));
    dev_corpus = to_iobes_corpus(std::move(dev_corpus));
  }
  spdlog::info("loaded {} train / {} dev sentences", train_corpus.size(), dev_corpus.size());

  Model model = initialize_model(train_corpus, cfg.arch, cfg.train.seed, cfg.min_count,
                                 cfg.pretrained, cfg.char_frequency_weighting);
  model.tag_scheme = cfg.iobes ? "iobes" : "none";
  const double setup_seconds = seconds_since(t_start);
  spdlog::info("{} training, {} words, {} chars, {} tags",
               cfg.adv.enabled ? "adversarial" : "baseline", model.vocab.words().size(),
               model.vocab.chars().size(), model.vocab.tag_count());

  std::ofstream log(m.epoch_log);
  if (!log) throw std::runtime_error("cannot write " + m.epoch_log.string());
  json epoch_seconds = json::array();
  const auto t_train = std::chrono::steady_clock::now();
  TrainResult result =
      train(std::move(model), train_corpus, dev_corpus, cfg.train, cfg.adv,
            [&](const EpochRecord& rec) {
              log << epoch_to_json(rec).dump() << '\n';
              log.flush();
              epoch_seconds.push_back(rec.seconds);
              spdlog::info("epoch {:>3}  lr {:.5f}  train {:.4f}  dev {:.4f}  acc {}{}",
                           rec.epoch, rec.learning_rate, rec.train_loss, rec.dev_loss,
                           format_percent(rec.dev_accuracy), rec.improved ? "  *" : "");
            });
  const double train_seconds = seconds_since(t_train);
  save_model(result.best_model, m.checkpoint);

  m.timings = {{"setup_seconds", setup_seconds},
               {"train_seconds", train_seconds},
               {"epoch_seconds", epoch_seconds},
               {"total_seconds", seconds_since(t_start)}};
  m.result = {{"epochs_run", result.log.size()},
              {"best_epoch", result.best_epoch},
              {"best_dev_accuracy", result.best_dev_accuracy},
              {"best_dev_loss", result.best_dev_loss}};
  write_json_file(out_dir / "manifest.json", manifest_to_json(m));
  spdlog::info("best dev accuracy {} at epoch {}; wrote {}",
               format_percent(result.best_dev_accuracy), result.best_epoch,
               m.checkpoint.string());
  return 0;
}

// ---------------------------------------------------------------- tag

struct LayoutArgs {
  std::string format = "conllu";
  std::size_t token_col = 0;
  std::size_t tag_col = 1;

  CorpusLayout layout() const { return CorpusLayout{parse_format(format), token_col, tag_col}; }
};

struct TagArgs {
  std::string model;
  std::string input;
  std::string output;
  LayoutArgs layout;
};

int cmd_tag(const TagArgs& a) {
  const CorpusLayout layout = a.layout.layout();
  const Model model = load_model(fs::path(a.model));
  const Corpus input = read_corpus(a.input, layout);
  const Corpus predicted = decode_predictions(model, tag_corpus(model, input));
  std::ifstream in(a.input);
  if (!in) throw std::runtime_error("cannot open " + a.input);
  std::ofstream out(a.output);
  if (!out) throw std::runtime_error("cannot write " + a.output);
  rewrite_tags(in, out, layout, predicted);
  spdlog::info("tagged {} sentences into {}", predicted.size(), a.output);
  return 0;
}

// ---------------------------------------------------------------- eval / analyze

struct EvalFlags {
  bool buckets = false;
  bool neighbors = false;
  bool tightness = false;
  bool raw_tightness = false;
  bool f1 = false;
};

struct ModelEvaluation {
  std::string label;
  EvalReport report;
  std::optional<BucketReport> buckets;
  std::optional<BucketReport> neighbors;
  std::optional<TightnessReport> tightness;
};

ModelEvaluation evaluate_model(const std::string& label, const Model& model,
                               const Corpus& raw_gold, const EvalFlags& flags) {
  const Corpus gold = model.tag_scheme == "iobes" ? normalize_chunk_tags(raw_gold) : raw_gold;
  const Corpus predicted = decode_predictions(model, tag_corpus(model, gold));
  ModelEvaluation ev;
  ev.label = label;
  ev.report = evaluate(gold, predicted,
                       flags.f1 ? std::optional<ChunkScheme>(ChunkScheme::kIob2) : std::nullopt);
  if (flags.buckets) ev.buckets = frequency_buckets(model.vocab, gold, predicted);
  if (flags.neighbors) ev.neighbors = neighbor_accuracy(model.vocab, gold, predicted);
  if (flags.tightness) {
    const NormalizationStats stats = compute_stats(model.params.words);
    ev.tightness = cluster_tightness(model.params.words,
                                     flags.raw_tightness ? nullptr : &stats, model.vocab, gold);
  }
  return ev;
}

json bucket_records(const std::string& label, const std::string& table,
                    const BucketReport& r) {
  json out = json::array();
  for (const Bucket& b : r.buckets) {
    out.push_back({{"kind", table},
                   {"model", label},
                   {"bucket", b.label},
                   {"count", b.count},
                   {"correct", b.correct},
                   {"accuracy", b.accuracy()}});
  }
  return out;
}

void write_report(const fs::path& path, const std::vector<ModelEvaluation>& evals) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const ModelEvaluation& ev : evals) {
    json rec = {{"kind", "accuracy"},
                {"model", ev.label},
                {"token_accuracy", ev.report.token_accuracy},
                {"sentence_accuracy", ev.report.sentence_accuracy},
                {"tokens", ev.report.tokens},
                {"sentences", ev.report.sentences}};
    if (ev.report.chunks) {
      rec["precision"] = ev.report.chunks->precision;
      rec["recall"] = ev.report.chunks->recall;
      rec["f1"] = ev.report.chunks->f1;
    }
    out << rec.dump() << '\n';
    if (ev.buckets) {
      for (const json& r : bucket_records(ev.label, "frequency_bucket", *ev.buckets)) {
        out << r.dump() << '\n';
      }
    }
    if (ev.neighbors) {
      for (const json& r : bucket_records(ev.label, "neighbor_bucket", *ev.neighbors)) {
        out << r.dump() << '\n';
      }
    }
    if (ev.tightness) {
      for (const ClusterTightness& c : ev.tightness->clusters) {
        out << json{{"kind", "tightness"},
                    {"model", ev.label},
                    {"tag", c.tag},
                    {"members", c.members},
                    {"tightness", c.tightness}}
                   .dump()
            << '\n';
      }
      out << json{{"kind", "tightness_overall"},
                  {"model", ev.label},
                  {"tightness", ev.tightness->overall}}
                 .dump()
          << '\n';
    }
  }
}

void print_reports(std::ostream& out, const std::vector<ModelEvaluation>& evals) {
  std::vector<std::pair<std::string, EvalReport>> acc;
  std::vector<std::pair<std::string, BucketReport>> buckets;
  std::vector<std::pair<std::string, BucketReport>> neighbors;
  std::vector<std::pair<std::string, TightnessReport>> tightness;
  for (const ModelEvaluation& ev : evals) {
    acc.emplace_back(ev.label, ev.report);
    if (ev.buckets) buckets.emplace_back(ev.label, *ev.buckets);
    if (ev.neighbors) neighbors.emplace_back(ev.label, *ev.neighbors);
    if (ev.tightness) tightness.emplace_back(ev.label, *ev.tightness);
  }
  print_eval_table(out, acc);
  if (!buckets.empty()) {
    out << '\n';
    print_bucket_table(out, "Frequency", buckets);
  }
  if (!neighbors.empty()) {
    out << '\n';
    print_bucket_table(out, "Neighbors of", neighbors);
  }
  if (!tightness.empty()) {
    out << '\n';
    print_tightness_table(out, tightness);
  }
}

struct EvalArgs {
  std::vector<std::string> models;
  std::vector<std::string> labels;
  std::string gold;
  std::optional<std::string> report;
  LayoutArgs layout;
  EvalFlags flags;
};

int cmd_eval(const EvalArgs& a) {
  if (!a.labels.empty() && a.labels.size() != a.models.size()) {
    throw UsageError("--label must be given once per --model");
  }
  const Corpus gold = read_corpus(a.gold, a.layout.layout());
  if (!has_gold_tags(gold)) {
    if (a.flags.tightness) throw UsageError("--tightness needs gold tags in " + a.gold);
    throw UsageError("evaluation needs gold tags in " + a.gold);
  }
  std::vector<ModelEvaluation> evals;
  for (std::size_t i = 0; i < a.models.size(); ++i) {
    const Model model = load_model(fs::path(a.models[i]));
    const std::string label =
        a.labels.empty() ? fs::path(a.models[i]).parent_path().filename().string()
                         : a.labels[i];
    evals.push_back(evaluate_model(label.empty() ? a.models[i] : label, model, gold, a.flags));
  }
  print_reports(std::cout, evals);
  if (a.report) write_report(*a.report, evals);
  return 0;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string out_dir;
  std::size_t tags = 8;
  std::size_t lexicon = 500;
  std::size_t train = 2000;
  std::size_t dev = 200;
  std::size_t test = 200;
  std::size_t max_len = 25;
  std::uint64_t seed = 1;
  double ambiguity = 0.0;
};

int cmd_generate(const GenerateArgs& a) {
  HmmSpec spec;
  try {
    spec = zipfian_spec(a.tags, a.lexicon, a.seed, a.ambiguity);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Corpus all = generate(spec, a.train + a.dev + a.test, a.max_len);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  auto write = [&](const std::string& name, std::size_t begin, std::size_t n) {
    const Corpus part(all.begin() + static_cast<std::ptrdiff_t>(begin),
                      all.begin() + static_cast<std::ptrdiff_t>(begin + n));
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    write_conllu(part, out);
  };
  write("train.conllu", 0, a.train);
  write("dev.conllu", a.train, a.dev);
  write("test.conllu", a.train + a.dev, a.test);
  spdlog::info("wrote {}/{}/{} sentences to {}", a.train, a.dev, a.test, dir.string());
  return 0;
}

void add_layout_options(CLI::App* cmd, LayoutArgs& l) {
  cmd->add_option("--format", l.format, "conllu or columns")->capture_default_str();
  cmd->add_option("--token-col", l.token_col, "token column for --format columns (0-based)")
      ->capture_default_str();
  cmd->add_option("--tag-col", l.tag_col, "tag column for --format columns (0-based)")
      ->capture_default_str();
}

}  // namespace

RunConfig apply_config(RunConfig cfg, const json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kConfigKeys.contains(key)) bad_key(key, "unknown key");
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) bad_key("seed", "expected a non-negative integer");
    cfg.train.seed = j.at("seed").get<std::uint64_t>();
  }
  take_count(j, "batch_size", cfg.train.batch_size);
  take_real(j, "momentum", cfg.train.momentum);
  take_real(j, "learning_rate", cfg.train.learning_rate);
  take_real(j, "decay_rate", cfg.train.decay_rate);
  take_real(j, "clip_threshold", cfg.train.clip_threshold);
  take_real(j, "dropout", cfg.train.dropout);
  cfg.arch.dropout = cfg.train.dropout;
  take_count(j, "max_epochs", cfg.train.max_epochs);
  take_count(j, "patience", cfg.train.patience);
  take_count(j, "threads", cfg.train.threads);
  if (j.contains("stats_refresh")) {
    const json& v = j.at("stats_refresh");
    if (v == "batch") {
      cfg.train.stats_refresh = StatsRefresh::kPerBatch;
    } else if (v == "epoch") {
      cfg.train.stats_refresh = StatsRefresh::kPerEpoch;
    } else {
      bad_key("stats_refresh", "expected \"batch\" or \"epoch\"");
    }
  }
  if (j.contains("gradient_reduction")) {
    const json& v = j.at("gradient_reduction");
    if (v == "sum") {
      cfg.train.reduction = GradientReduction::kSum;
    } else if (v == "mean") {
      cfg.train.reduction = GradientReduction::kMean;
    } else {
      bad_key("gradient_reduction", "expected \"sum\" or \"mean\"");
    }
  }
  take_real(j, "alpha", cfg.adv.alpha);
  take_real(j, "gamma", cfg.adv.gamma);
  take_bool(j, "adversarial_enabled", cfg.adv.enabled);
  take_count(j, "char_dim", cfg.arch.char_dim);
  take_count(j, "char_hidden", cfg.arch.char_hidden);
  take_count(j, "word_dim", cfg.arch.word_dim);
  take_count(j, "word_hidden", cfg.arch.word_hidden);
  if (j.contains("min_count")) {
    if (!j.at("min_count").is_number_integer()) bad_key("min_count", "expected an integer");
    cfg.min_count = j.at("min_count").get<std::int64_t>();
  }
  if (j.contains("pretrained_embeddings")) {
    const json& v = j.at("pretrained_embeddings");
    if (v.is_null()) {
      cfg.pretrained.reset();
    } else if (v.is_string()) {
      cfg.pretrained = v.get<std::string>();
    } else {
      bad_key("pretrained_embeddings", "expected a path or null");
    }
  }
  take_bool(j, "char_frequency_weighting", cfg.char_frequency_weighting);
  if (j.contains("format")) {
    if (!j.at("format").is_string()) bad_key("format", "expected a string");
    cfg.layout.format = parse_format(j.at("format").get<std::string>());
  }
  take_count(j, "token_col", cfg.layout.token_col);
  take_count(j, "tag_col", cfg.layout.tag_col);
  take_bool(j, "iobes", cfg.iobes);
  try {
    cfg.train.validate();
    cfg.adv.validate();
    TaggerArchitecture probe = cfg.arch;
    probe.tag_count = 1;
    probe.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  return json{
      {"seed", cfg.train.seed},
      {"batch_size", cfg.train.batch_size},
      {"momentum", cfg.train.momentum},
      {"learning_rate", cfg.train.learning_rate},
      {"decay_rate", cfg.train.decay_rate},
      {"clip_threshold", cfg.train.clip_threshold},
      {"dropout", cfg.train.dropout},
      {"max_epochs", cfg.train.max_epochs},
      {"patience", cfg.train.patience},
      {"threads", cfg.train.threads},
      {"stats_refresh", cfg.train.stats_refresh == StatsRefresh::kPerBatch ? "batch" : "epoch"},
      {"gradient_reduction", cfg.train.reduction == GradientReduction::kSum ? "sum" : "mean"},
      {"alpha", cfg.adv.alpha},
      {"gamma", cfg.adv.gamma},
      {"adversarial_enabled", cfg.adv.enabled},
      {"char_dim", cfg.arch.char_dim},
      {"char_hidden", cfg.arch.char_hidden},
      {"word_dim", cfg.arch.word_dim},
      {"word_hidden", cfg.arch.word_hidden},
      {"min_count", cfg.min_count},
      {"pretrained_embeddings",
       cfg.pretrained ? json(cfg.pretrained->string()) : json(nullptr)},
      {"char_frequency_weighting", cfg.char_frequency_weighting},
      {"format", format_name(cfg.layout.format)},
      {"token_col", cfg.layout.token_col},
      {"tag_col", cfg.layout.tag_col},
      {"iobes", cfg.iobes}};
}

json manifest_to_json(const RunManifest& m) {
  return json{{"config", config_to_json(m.config)},
              {"seed", m.config.train.seed},
              {"data", {{"train", m.train_path.string()}, {"dev", m.dev_path.string()}}},
              {"checkpoint", m.checkpoint.string()},
              {"epoch_log", m.epoch_log.string()},
              {"build_id", m.build_id},
              {"timings", m.timings},
              {"result", m.result}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  try {
    m.config = apply_config(RunConfig{}, j.at("config"));
    m.train_path = j.at("data").at("train").get<std::string>();
    m.dev_path = j.at("data").at("dev").get<std::string>();
    m.checkpoint = j.value("checkpoint", "");
    m.epoch_log = j.value("epoch_log", "");
    m.build_id = j.value("build_id", "");
    m.timings = j.value("timings", json::object());
    m.result = j.value("result", json::object());
  } catch (const json::exception& e) {
    throw UsageError(std::string("manifest: ") + e.what());
  }
  if (j.contains("seed") && j.at("seed") != j.at("config").at("seed")) {
    throw UsageError("manifest: seed disagrees with config.seed");
  }
  return m;
}

json epoch_to_json(const EpochRecord& rec) {
  return json{{"epoch", rec.epoch},
              {"learning_rate", rec.learning_rate},
              {"train_loss", rec.train_loss},
              {"dev_loss", rec.dev_loss},
              {"dev_accuracy", rec.dev_accuracy},
              {"improved", rec.improved}};
}

Corpus decode_predictions(const Model& model, const Corpus& predicted) {
  if (model.tag_scheme != "iobes") return predicted;
  Corpus out = predicted;
  for (Sentence& s : out) {
    std::vector<std::string> tags(s.size(), "O");
    for (const Span& span : decode_spans_repaired(s.tags(), ChunkScheme::kIobes)) {
      tags[span.start] = "B-" + span.type;
      for (std::size_t t = span.start + 1; t <= span.end; ++t) tags[t] = "I-" + span.type;
    }
    for (std::size_t i = 0; i < s.size(); ++i) s.tokens[i].tag = tags[i];
  }
  return out;
}

int run_cli(int argc, char** argv) {
  configure_logging();
  CLI::App app{"BiLSTM-CRF sequence tagger with adversarial training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(build_id()));
  app.footer("Log verbosity: ADVTAGGER_LOG=trace|debug|info|warn|error|off");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a tagger");
  train_cmd->add_option("--config", train_args.config, "JSON config file");
  train_cmd->add_option("--manifest", train_args.manifest,
                        "rerun from a manifest written by an earlier run");
  train_cmd->add_option("--train", train_args.train, "training corpus");
  train_cmd->add_option("--dev", train_args.dev, "development corpus");
  train_cmd->add_option("--out", train_args.out_dir, "output directory")->required();
  train_cmd->add_option("--seed", train_args.seed);
  train_cmd->add_option("--alpha", train_args.alpha);
  train_cmd->add_option("--gamma", train_args.gamma);
  train_cmd->add_option("--adversarial", train_args.adversarial, "true or false");
  train_cmd->add_option("--epochs", train_args.epochs, "maximum epochs");
  train_cmd->add_option("--threads", train_args.threads, "worker threads per batch");
  train_cmd->add_option("--pretrained", train_args.pretrained, "word embedding text file");

  TagArgs tag_args;
  auto* tag_cmd = app.add_subcommand("tag", "tag a corpus with a trained model");
  tag_cmd->add_option("--model", tag_args.model, "checkpoint")->required();
  tag_cmd->add_option("--input", tag_args.input, "corpus to tag")->required();
  tag_cmd->add_option("--output", tag_args.output, "tagged output")->required();
  add_layout_options(tag_cmd, tag_args.layout);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model against gold tags");
  eval_cmd->add_option("--model", eval_args.models, "checkpoint")->required()->expected(1);
  eval_cmd->add_option("--gold", eval_args.gold, "gold corpus")->required();
  eval_cmd->add_option("--report", eval_args.report, "JSON-lines report file");
  eval_cmd->add_flag("--buckets", eval_args.flags.buckets, "accuracy by training frequency");
  eval_cmd->add_flag("--neighbors", eval_args.flags.neighbors,
                     "neighbor accuracy by training frequency");
  eval_cmd->add_flag("--tightness", eval_args.flags.tightness, "embedding cluster tightness");
  eval_cmd->add_flag("--raw-tightness", eval_args.flags.raw_tightness,
                     "tightness on raw instead of normalized embeddings");
  eval_cmd->add_flag("--f1", eval_args.flags.f1, "chunk precision, recall and F1");
  add_layout_options(eval_cmd, eval_args.layout);

  EvalArgs analyze_args;
  analyze_args.flags = EvalFlags{true, true, true, false, false};
  auto* analyze_cmd =
      app.add_subcommand("analyze", "compare several models with all analysis tables");
  analyze_cmd->add_option("--model", analyze_args.models, "checkpoint (repeatable)")
      ->required();
  analyze_cmd->add_option("--label", analyze_args.labels, "column label per model");
  analyze_cmd->add_option("--gold", analyze_args.gold, "gold corpus")->required();
  analyze_cmd->add_option("--report", analyze_args.report, "JSON-lines report file");
  analyze_cmd->add_flag("--raw-tightness", analyze_args.flags.raw_tightness,
                        "tightness on raw instead of normalized embeddings");
  analyze_cmd->add_flag("--f1", analyze_args.flags.f1, "chunk precision, recall and F1");
  add_layout_options(analyze_cmd, analyze_args.layout);

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic HMM corpus");
  gen_cmd->add_option("--out", gen_args.out_dir, "output directory")->required();
  gen_cmd->add_option("--tags", gen_args.tags)->capture_default_str();
  gen_cmd->add_option("--lexicon", gen_args.lexicon)->capture_default_str();
  gen_cmd->add_option("--train", gen_args.train)->capture_default_str();
  gen_cmd->add_option("--dev", gen_args.dev)->capture_default_str();
  gen_cmd->add_option("--test", gen_args.test)->capture_default_str();
  gen_cmd->add_option("--max-len", gen_args.max_len)->capture_default_str();
  gen_cmd->add_option("--seed", gen_args.seed)->capture_default_str();
  gen_cmd->add_option("--ambiguity", gen_args.ambiguity, "emission mass shared across tags")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (tag_cmd->parsed()) return cmd_tag(tag_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (analyze_cmd->parsed()) return cmd_eval(analyze_args);
    if (gen_cmd->parsed()) return cmd_generate(gen_args);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    std::cerr << app.help() << std::flush;
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}

}  // namespace advtag
