#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace advtag {

// Input error carrying the 1-based line where it was detected (0 if none).
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line = 0);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Token {
  std::string form;
  std::string tag;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Sentence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  std::vector<std::string> tags() const;
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

using Corpus = std::vector<Sentence>;

enum class CorpusFormat { kConllu, kColumns };

// Where tokens and tags live in a file. For kConllu the columns are fixed
// (FORM, UPOS); for kColumns they are 0-based whitespace-separated columns.
struct CorpusLayout {
  CorpusFormat format = CorpusFormat::kConllu;
  std::size_t token_col = 0;
  std::size_t tag_col = 1;
};

Corpus read_conllu(std::istream& in);
Corpus read_conllu(const std::filesystem::path& path);
Corpus read_conll_columns(std::istream& in, std::size_t token_col,
                          std::size_t tag_col);
Corpus read_conll_columns(const std::filesystem::path& path,
                          std::size_t token_col, std::size_t tag_col);
Corpus read_corpus(const std::filesystem::path& path, const CorpusLayout& layout);

// Minimal CoNLL-U: ID, FORM, UPOS filled; other columns "_".
void write_conllu(const Corpus& corpus, std::ostream& out);
// Two columns per line: form and tag.
void write_conll_columns(const Corpus& corpus, std::ostream& out);

// Copies `in` to `out`, replacing the tag column of every token line with the
// tags of `predicted` (in order). Comments, multiword ranges, empty nodes and
// any other columns pass through untouched.
void rewrite_tags(std::istream& in, std::ostream& out, const CorpusLayout& layout,
                  const Corpus& predicted);

// Splits UTF-8 text into code points (each returned as its byte sequence).
std::vector<std::string> utf8_chars(std::string_view text);
// ASCII lowercasing; non-ASCII bytes pass through.
std::string lowercase(std::string_view text);

// IOB1/IOB2 -> IOBES.
std::vector<std::string> to_iobes(const std::vector<std::string>& tags);
// IOBES -> IOB2. Throws on sequences that are not valid IOBES.
std::vector<std::string> iobes_to_iob2(const std::vector<std::string>& tags);
void validate_iobes(const std::vector<std::string>& tags);

// Word, character and tag inventories built from training data.
//
// Words are keyed by their lowercased form. Characters are UTF-8 code points
// of the original (cased) form. Ids 0 and 1 are PAD and UNK for both words and
// characters; tags have no reserved ids.
class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  static Vocab build(const Corpus& train, std::int64_t min_count = 1);

  std::size_t word_id(std::string_view form) const;
  std::size_t char_id(std::string_view ch) const;
  std::vector<std::size_t> char_ids(std::string_view form) const;
  // Throws DataError for tags outside the closed training tag set.
  std::size_t tag_id(std::string_view tag) const;
  bool has_tag(std::string_view tag) const;
  bool has_word(std::string_view form) const;

  const std::string& word(std::size_t id) const { return words_.at(id); }
  const std::string& character(std::size_t id) const { return chars_.at(id); }
  const std::string& tag(std::size_t id) const { return tags_.at(id); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::string>& chars() const { return chars_; }
  const std::vector<std::string>& tags() const { return tags_; }

  std::size_t word_count() const { return words_.size(); }
  std::size_t char_count() const { return chars_.size(); }
  std::size_t tag_count() const { return tags_.size(); }

  // Training-set occurrence count of a word (lowercased), 0 when unseen.
  std::int64_t frequency(std::string_view form) const;

  // Per word id: train count; UNK gets the total count of train tokens that
  // fell below min_count; PAD gets 0.
  std::vector<double> word_weights() const;
  // Per char id: train count over all token characters.
  std::vector<double> char_weights() const;

  // Raw state for serialization.
  struct State {
    std::vector<std::string> words;
    std::vector<std::string> chars;
    std::vector<std::string> tags;
    std::vector<std::pair<std::string, std::int64_t>> word_frequencies;
    std::vector<std::int64_t> char_counts;
    std::int64_t unk_word_count = 0;
  };
  State state() const;
  static Vocab from_state(State state);

  friend bool operator==(const Vocab& a, const Vocab& b);

 private:
  void reindex();

  std::vector<std::string> words_;
  std::vector<std::string> chars_;
  std::vector<std::string> tags_;
  std::unordered_map<std::string, std::size_t> word_index_;
  std::unordered_map<std::string, std::size_t> char_index_;
  std::unordered_map<std::string, std::size_t> tag_index_;
  std::unordered_map<std::string, std::int64_t> frequency_;
  std::vector<std::int64_t> char_counts_;
  std::int64_t unk_word_count_ = 0;
};

}  // namespace advtag
