#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "advtag/data.hpp"

using namespace advtag;

namespace {

std::string conllu_line(const std::string& id, const std::string& form, const std::string& tag) {
  return id + "\t" + form + "\t_\t" + tag + "\t_\t_\t_\t_\t_\t_\n";
}

Corpus parse_conllu(const std::string& text) {
  std::istringstream in(text);
  return read_conllu(in);
}

}  // namespace

TEST(ReadConllu, BlockOfThreeTokens) {
  const Corpus c = parse_conllu("# sent_id = 1\n" + conllu_line("1", "The", "DET") +
                                conllu_line("2", "dog", "NOUN") +
                                conllu_line("3", "barks", "VERB") + "\n");
  ASSERT_EQ(c.size(), 1u);
  ASSERT_EQ(c[0].size(), 3u);
  EXPECT_EQ(c[0].tokens[1].form, "dog");
  EXPECT_EQ(c[0].tokens[2].tag, "VERB");
}

TEST(ReadConllu, MultiwordRangesAndEmptyNodesSkipped) {
  const Corpus c = parse_conllu(conllu_line("1", "Vamos", "VERB") +
                                conllu_line("2-3", "du", "_") + conllu_line("2", "de", "ADP") +
                                conllu_line("3", "le", "DET") + conllu_line("3.1", "x", "_") +
                                "\n");
  ASSERT_EQ(c.size(), 1u);
  ASSERT_EQ(c[0].size(), 3u);
  EXPECT_EQ(c[0].tokens[1].form, "de");
  EXPECT_EQ(c[0].tokens[2].form, "le");
}

TEST(ReadConllu, TwoBlocksTwoSentences) {
  const Corpus c = parse_conllu(conllu_line("1", "a", "X") + "\n" + conllu_line("1", "b", "Y") +
                                "\n\n");
  EXPECT_EQ(c.size(), 2u);
}

TEST(ReadConllu, LastBlockWithoutTrailingBlankLine) {
  const Corpus c = parse_conllu(conllu_line("1", "a", "X"));
  EXPECT_EQ(c.size(), 1u);
}

TEST(ReadConllu, WrongColumnCountReportsLine) {
  try {
    parse_conllu(conllu_line("1", "a", "X") + "2\tb\t_\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ReadColumns, SelectsColumns) {
  std::istringstream in("the DT B-NP\ncat NN I-NP\n");
  const Corpus c = read_conll_columns(in, 0, 2);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].tokens[0].form, "the");
  EXPECT_EQ(c[0].tokens[0].tag, "B-NP");
}

TEST(ReadColumns, DocstartSkipped) {
  std::istringstream in("-DOCSTART- -X- O O\n\nEU NNP B-NP B-ORG\n");
  const Corpus c = read_conll_columns(in, 0, 3);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].tokens[0].form, "EU");
}

TEST(ReadColumns, EmptyFileEmptyCorpus) {
  std::istringstream in("");
  EXPECT_TRUE(read_conll_columns(in, 0, 1).empty());
}

TEST(ReadColumns, MissingColumnReportsLine) {
  std::istringstream in("a B\nb\n");
  try {
    read_conll_columns(in, 0, 1);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Writers, ConlluRoundTrip) {
  Corpus c = {Sentence{{{"Hello", "INTJ"}, {"world", "NOUN"}}}, Sentence{{{"ok", "X"}}}};
  std::stringstream buf;
  write_conllu(c, buf);
  const Corpus back = read_conllu(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].tokens[1].form, "world");
  EXPECT_EQ(back[1].tokens[0].tag, "X");
}

TEST(Writers, ColumnsRoundTrip) {
  Corpus c = {Sentence{{{"the", "B-NP"}, {"cat", "I-NP"}}}};
  std::stringstream buf;
  write_conll_columns(c, buf);
  const Corpus back = read_conll_columns(buf, 0, 1);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].tags(), (std::vector<std::string>{"B-NP", "I-NP"}));
}

TEST(RewriteTags, PreservesOtherContent) {
  const std::string text = "# c\n1\tA\tlemma\tX\tx\t_\t0\troot\t_\t_\n" +
                           conllu_line("2-3", "zz", "_") + conllu_line("2", "b", "X") +
                           conllu_line("3", "c", "X") + "\n";
  Corpus predicted = {Sentence{{{"A", "P"}, {"b", "Q"}, {"c", "R"}}}};
  std::istringstream in(text);
  std::ostringstream out;
  rewrite_tags(in, out, CorpusLayout{}, predicted);
  const std::string expected = "# c\n1\tA\tlemma\tP\tx\t_\t0\troot\t_\t_\n" +
                               conllu_line("2-3", "zz", "_") + conllu_line("2", "b", "Q") +
                               conllu_line("3", "c", "R") + "\n";
  EXPECT_EQ(out.str(), expected);
}

TEST(Utf8, SplitsCodePoints) {
  EXPECT_EQ(utf8_chars("añb"), (std::vector<std::string>{"a", "ñ", "b"}));
  EXPECT_EQ(utf8_chars("日本"), (std::vector<std::string>{"日", "本"}));
}

TEST(Lowercase, AsciiOnly) { EXPECT_EQ(lowercase("AbÇ"), "abÇ"); }

TEST(Iobes, TwoTokenChunk) {
  EXPECT_EQ(to_iobes({"B-NP", "I-NP", "O"}), (std::vector<std::string>{"B-NP", "E-NP", "O"}));
}

TEST(Iobes, Singleton) {
  EXPECT_EQ(to_iobes({"B-NP", "O"}), (std::vector<std::string>{"S-NP", "O"}));
}

TEST(Iobes, Iob1Input) {
  // IOB1: I- starts a chunk unless it continues one of the same type.
  EXPECT_EQ(to_iobes({"I-PER", "I-PER", "B-PER", "I-LOC"}),
            (std::vector<std::string>{"B-PER", "E-PER", "S-PER", "S-LOC"}));
}

TEST(Iobes, InvalidSequenceRejected) {
  EXPECT_THROW(validate_iobes({"B-NP", "O"}), DataError);
  EXPECT_THROW(validate_iobes({"E-NP"}), DataError);
  EXPECT_THROW(validate_iobes({"B-NP", "E-VP"}), DataError);
  EXPECT_NO_THROW(validate_iobes({"B-NP", "I-NP", "E-NP", "S-VP", "O"}));
}

TEST(Iobes, RandomRoundTrip) {
  std::mt19937_64 rng(7);
  const std::vector<std::string> types = {"NP", "VP", "PP"};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> iobes;
    std::uniform_int_distribution<int> len(0, 12);
    const int n = len(rng);
    while (static_cast<int>(iobes.size()) < n) {
      const std::string& ty = types[rng() % types.size()];
      const int room = n - static_cast<int>(iobes.size());
      const int kind = static_cast<int>(rng() % 3);
      if (kind == 0) {
        iobes.push_back("O");
      } else if (kind == 1 || room == 1) {
        iobes.push_back("S-" + ty);
      } else {
        const int span = 2 + static_cast<int>(rng() % static_cast<unsigned>(room - 1));
        iobes.push_back("B-" + ty);
        for (int i = 1; i + 1 < span; ++i) iobes.push_back("I-" + ty);
        iobes.push_back("E-" + ty);
      }
    }
    ASSERT_NO_THROW(validate_iobes(iobes));
    EXPECT_EQ(to_iobes(iobes_to_iob2(iobes)), iobes);
  }
}

TEST(Vocab, MinCountMapsRareWordsToUnk) {
  const Corpus c = {Sentence{{{"a", "X"}, {"a", "X"}, {"b", "Y"}}}};
  const Vocab v = Vocab::build(c, 2);
  EXPECT_TRUE(v.has_word("a"));
  EXPECT_FALSE(v.has_word("b"));
  EXPECT_EQ(v.word_id("b"), Vocab::kUnk);
  EXPECT_EQ(v.frequency("a"), 2);
  EXPECT_EQ(v.frequency("b"), 1);
  EXPECT_EQ(v.frequency("zzz"), 0);
}

TEST(Vocab, MinCountOneKeepsEverything) {
  const Corpus c = {Sentence{{{"a", "X"}, {"a", "X"}, {"b", "Y"}}}};
  const Vocab v = Vocab::build(c, 1);
  EXPECT_TRUE(v.has_word("a"));
  EXPECT_TRUE(v.has_word("b"));
  EXPECT_EQ(v.word_count(), 4u);  // PAD, UNK, a, b
}

TEST(Vocab, ReservedIdsAndLowercasing) {
  const Corpus c = {Sentence{{{"Dog", "N"}, {"dog", "N"}}}};
  const Vocab v = Vocab::build(c);
  EXPECT_EQ(v.word_id("DOG"), v.word_id("dog"));
  EXPECT_NE(v.word_id("dog"), Vocab::kUnk);
  EXPECT_EQ(v.frequency("DOG"), 2);
  EXPECT_EQ(v.char_id("q"), Vocab::kUnk);
  EXPECT_NE(v.char_id("D"), v.char_id("d"));
}

TEST(Vocab, UnknownTagRejected) {
  const Vocab v = Vocab::build({Sentence{{{"a", "X"}}}});
  EXPECT_THROW(v.tag_id("Y"), DataError);
  EXPECT_EQ(v.tag_id("X"), 0u);
}

TEST(Vocab, WeightsFollowCounts) {
  const Corpus c = {Sentence{{{"a", "X"}, {"a", "X"}, {"b", "Y"}, {"c", "Y"}}}};
  const Vocab v = Vocab::build(c, 2);
  const auto w = v.word_weights();
  EXPECT_EQ(w[Vocab::kPad], 0.0);
  EXPECT_EQ(w[Vocab::kUnk], 2.0);  // b and c
  EXPECT_EQ(w[v.word_id("a")], 2.0);
}

TEST(Vocab, StateRoundTrip) {
  const Corpus c = {Sentence{{{"a", "X"}, {"bé", "Y"}}}};
  const Vocab v = Vocab::build(c);
  EXPECT_EQ(Vocab::from_state(v.state()), v);
}
