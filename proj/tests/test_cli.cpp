#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "advtag/checkpoint.hpp"
#include "advtag/cli.hpp"
#include "advtag/eval.hpp"

using namespace advtag;
namespace fs = std::filesystem;

namespace {

const fs::path kData = ADVTAG_TEST_DATA;

int run(const std::string& args) {
  const std::string cmd = std::string(ADVTAGGER_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("advtag_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& body) {
    const fs::path p = dir_ / "config.json";
    std::ofstream(p) << body;
    return p;
  }

  fs::path dir_;
};

const char* kTinyConfig =
    R"({"word_dim": 8, "char_dim": 4, "char_hidden": 4, "word_hidden": 8,
        "max_epochs": 2, "seed": 3})";

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  const RunConfig cfg = apply_config(RunConfig{}, nlohmann::json::parse(
      R"({"alpha": 0.1, "adversarial_enabled": true, "batch_size": 4,
          "stats_refresh": "epoch", "format": "columns", "tag_col": 2})"));
  EXPECT_EQ(cfg.adv.alpha, 0.1);
  EXPECT_TRUE(cfg.adv.enabled);
  EXPECT_EQ(cfg.adv.gamma, 0.5);
  EXPECT_EQ(cfg.train.batch_size, 4u);
  EXPECT_EQ(cfg.train.stats_refresh, StatsRefresh::kPerEpoch);
  EXPECT_EQ(cfg.layout.format, CorpusFormat::kColumns);
  EXPECT_EQ(cfg.layout.tag_col, 2u);
  EXPECT_EQ(cfg.train.momentum, 0.9);
}

TEST(Config, UnknownKeyAndBadValuesRejected) {
  EXPECT_THROW(apply_config(RunConfig{}, nlohmann::json::parse(R"({"alhpa": 0.1})")), UsageError);
  EXPECT_THROW(apply_config(RunConfig{}, nlohmann::json::parse(R"({"batch_size": -1})")),
               UsageError);
  EXPECT_THROW(apply_config(RunConfig{}, nlohmann::json::parse(R"({"gamma": 2.0})")), UsageError);
  EXPECT_THROW(apply_config(RunConfig{}, nlohmann::json::parse(R"({"iobes": "yes"})")),
               UsageError);
}

TEST(Config, JsonRoundTrip) {
  RunConfig cfg;
  cfg.adv.alpha = 0.01;
  cfg.iobes = true;
  cfg.pretrained = "/x/y.txt";
  const RunConfig back = apply_config(RunConfig{}, config_to_json(cfg));
  EXPECT_EQ(config_to_json(back), config_to_json(cfg));
}

TEST(Manifest, RoundTrip) {
  RunManifest m;
  m.config.train.seed = 42;
  m.train_path = "/data/train.conllu";
  m.dev_path = "/data/dev.conllu";
  m.build_id = "abc";
  const RunManifest back = manifest_from_json(manifest_to_json(m));
  EXPECT_EQ(back.config.train.seed, 42u);
  EXPECT_EQ(back.train_path, m.train_path);
  EXPECT_EQ(back.dev_path, m.dev_path);
}

TEST(DecodePredictions, IobesBecomesIob2) {
  Model m;
  m.tag_scheme = "iobes";
  Corpus c = {Sentence{{{"a", "B-NP"}, {"b", "E-NP"}, {"c", "I-VP"}, {"d", "O"}}}};
  const Corpus out = decode_predictions(m, c);
  EXPECT_EQ(out[0].tags(), (std::vector<std::string>{"B-NP", "I-NP", "B-VP", "O"}));
}

TEST_F(CliTest, MissingConfigIsUsageError) {
  EXPECT_EQ(run("train --train x --dev y --out " + (dir_ / "o").string()), 2);
}

TEST_F(CliTest, UnknownSubcommandIsUsageError) { EXPECT_EQ(run("frobnicate"), 2); }

TEST_F(CliTest, MissingCheckpointIsRuntimeError) {
  EXPECT_EQ(run("tag --model " + (dir_ / "none.ckpt").string() + " --input " +
                (kData / "ud_test.conllu").string() + " --output " + (dir_ / "o").string()),
            1);
}

TEST_F(CliTest, TrainTagEvalEndToEnd) {
  const fs::path cfg = write_config(kTinyConfig);
  const fs::path out = dir_ / "run";
  ASSERT_EQ(run("train --config " + cfg.string() + " --train " +
                (kData / "ud_train.conllu").string() + " --dev " +
                (kData / "ud_dev.conllu").string() + " --out " + out.string()),
            0);
  ASSERT_TRUE(fs::exists(out / "model.ckpt"));
  ASSERT_TRUE(fs::exists(out / "manifest.json"));

  std::ifstream log(out / "epochs.jsonl");
  std::string line;
  std::size_t epochs = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"epoch", "learning_rate", "train_loss", "dev_loss", "dev_accuracy"}) {
      EXPECT_TRUE(j.contains(key)) << key;
    }
    ++epochs;
  }
  EXPECT_EQ(epochs, 2u);

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest.at("config").at("adversarial_enabled"), false);
  EXPECT_TRUE(manifest.at("timings").contains("train_seconds"));
  EXPECT_FALSE(manifest.at("build_id").get<std::string>().empty());

  const fs::path tagged = dir_ / "tagged.conllu";
  ASSERT_EQ(run("tag --model " + (out / "model.ckpt").string() + " --input " +
                (kData / "ud_test.conllu").string() + " --output " + tagged.string()),
            0);
  const Corpus gold = read_conllu(kData / "ud_test.conllu");
  const Corpus pred = read_conllu(tagged);
  ASSERT_EQ(pred.size(), gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) ASSERT_EQ(pred[i].size(), gold[i].size());

  EXPECT_EQ(run("eval --model " + (out / "model.ckpt").string() + " --gold " +
                (kData / "ud_test.conllu").string() +
                " --buckets --neighbors --tightness --report " + (dir_ / "r.jsonl").string()),
            0);
  EXPECT_TRUE(fs::exists(dir_ / "r.jsonl"));
}

TEST_F(CliTest, AdversarialFlagSelectsMode) {
  const fs::path cfg = write_config(kTinyConfig);
  ASSERT_EQ(run("train --config " + cfg.string() + " --adversarial true --epochs 1 --train " +
                (kData / "ud_train.conllu").string() + " --dev " +
                (kData / "ud_dev.conllu").string() + " --out " + (dir_ / "adv").string()),
            0);
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "adv" / "manifest.json"));
  EXPECT_EQ(manifest.at("config").at("adversarial_enabled"), true);
  EXPECT_EQ(manifest.at("config").at("max_epochs"), 1);
}

TEST_F(CliTest, OverfitRunTagsTrainingFilePerfectly) {
  const fs::path train = dir_ / "one.conllu";
  write_conllu({Sentence{{{"the", "DET"}, {"dog", "NOUN"}, {"runs", "VERB"}, {"fast", "ADV"}}}},
               *std::make_unique<std::ofstream>(train));
  const fs::path cfg = write_config(
      R"({"word_dim": 8, "char_dim": 4, "char_hidden": 4, "word_hidden": 8,
          "max_epochs": 60, "patience": 60, "dropout": 0.0, "learning_rate": 0.05})");
  ASSERT_EQ(run("train --config " + cfg.string() + " --train " + train.string() + " --dev " +
                train.string() + " --out " + (dir_ / "r").string()),
            0);
  const fs::path tagged = dir_ / "tagged.conllu";
  ASSERT_EQ(run("tag --model " + (dir_ / "r" / "model.ckpt").string() + " --input " +
                train.string() + " --output " + tagged.string()),
            0);
  EXPECT_EQ(read_conllu(tagged)[0].tags(), read_conllu(train)[0].tags());
}

TEST_F(CliTest, EmptyInputGivesEmptyOutput) {
  const fs::path cfg = write_config(kTinyConfig);
  ASSERT_EQ(run("train --config " + cfg.string() + " --epochs 1 --train " +
                (kData / "ud_train.conllu").string() + " --dev " +
                (kData / "ud_dev.conllu").string() + " --out " + (dir_ / "r").string()),
            0);
  std::ofstream(dir_ / "empty.conllu").close();
  EXPECT_EQ(run("tag --model " + (dir_ / "r" / "model.ckpt").string() + " --input " +
                (dir_ / "empty.conllu").string() + " --output " + (dir_ / "out.conllu").string()),
            0);
  EXPECT_EQ(fs::file_size(dir_ / "out.conllu"), 0u);
}

TEST_F(CliTest, TightnessWithoutGoldTagsIsAnError) {
  const fs::path cfg = write_config(kTinyConfig);
  ASSERT_EQ(run("train --config " + cfg.string() + " --epochs 1 --train " +
                (kData / "ud_train.conllu").string() + " --dev " +
                (kData / "ud_dev.conllu").string() + " --out " + (dir_ / "r").string()),
            0);
  Corpus untagged = read_conllu(kData / "ud_test.conllu");
  for (Sentence& s : untagged) {
    for (Token& t : s.tokens) t.tag = "_";
  }
  {
    std::ofstream out(dir_ / "untagged.conllu");
    write_conllu(untagged, out);
  }
  EXPECT_EQ(run("eval --model " + (dir_ / "r" / "model.ckpt").string() + " --gold " +
                (dir_ / "untagged.conllu").string() + " --tightness"),
            2);
}

TEST_F(CliTest, ChunkingColumnsWithIobes) {
  const fs::path cfg = write_config(
      R"({"word_dim": 8, "char_dim": 4, "char_hidden": 4, "word_hidden": 8, "max_epochs": 3,
          "format": "columns", "token_col": 0, "tag_col": 2, "iobes": true})");
  ASSERT_EQ(run("train --config " + cfg.string() + " --train " +
                (kData / "chunk_train.txt").string() + " --dev " +
                (kData / "chunk_test.txt").string() + " --out " + (dir_ / "r").string()),
            0);
  const Model m = load_model(dir_ / "r" / "model.ckpt");
  EXPECT_EQ(m.tag_scheme, "iobes");
  EXPECT_TRUE(m.vocab.has_tag("E-NP"));
  const fs::path tagged = dir_ / "tagged.txt";
  ASSERT_EQ(run("tag --format columns --tag-col 2 --model " + (dir_ / "r" / "model.ckpt").string() +
                " --input " + (kData / "chunk_test.txt").string() + " --output " + tagged.string()),
            0);
  // Output keeps the input's three columns and IOB2 tags.
  const Corpus back = read_conll_columns(tagged, 0, 2);
  for (const Sentence& s : back) {
    for (const Token& t : s.tokens) EXPECT_TRUE(t.tag == "O" || t.tag[0] == 'B' || t.tag[0] == 'I');
  }
  EXPECT_EQ(run("eval --f1 --format columns --tag-col 2 --model " +
                (dir_ / "r" / "model.ckpt").string() + " --gold " +
                (kData / "chunk_test.txt").string()),
            0);
}

TEST_F(CliTest, GenerateWritesThreeSplits) {
  ASSERT_EQ(run("generate --out " + dir_.string() + " --train 30 --dev 5 --test 5 --tags 4 "
                "--lexicon 40"),
            0);
  EXPECT_EQ(read_conllu(dir_ / "train.conllu").size(), 30u);
  EXPECT_EQ(read_conllu(dir_ / "dev.conllu").size(), 5u);
  EXPECT_EQ(read_conllu(dir_ / "test.conllu").size(), 5u);
}
