#include "advtag/data.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace advtag {

DataError::DataError(const std::string& what, std::size_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                  : what),
      line_(line) {}

std::vector<std::string> Sentence::tags() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) out.push_back(t.tag);
  return out;
}

namespace {

std::vector<std::string> split_on(std::string_view line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> fields;
  std::istringstream in{std::string(line)};
  std::string f;
  while (in >> f) fields.push_back(f);
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

// "3-4" multiword range or "5.1" empty node.
bool is_conllu_non_token(std::string_view id) {
  return id.find('-') != std::string_view::npos ||
         id.find('.') != std::string_view::npos;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

void flush_sentence(Sentence& current, Corpus& corpus) {
  if (!current.tokens.empty()) corpus.push_back(std::move(current));
  current = Sentence{};
}

std::pair<std::string, std::string> split_prefix(const std::string& tag,
                                                 std::size_t position) {
  if (tag == "O") return {"O", ""};
  if (tag.size() < 3 || tag[1] != '-') {
    throw DataError("invalid chunk tag '" + tag + "' at position " +
                    std::to_string(position));
  }
  return {tag.substr(0, 1), tag.substr(2)};
}

}  // namespace

Corpus read_conllu(std::istream& in) {
  Corpus corpus;
  Sentence current;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) {
      flush_sentence(current, corpus);
      continue;
    }
    if (line.front() == '#') continue;
    const auto fields = split_on(line, '\t');
    if (fields.size() != 10) {
      throw DataError("expected 10 tab-separated columns, found " +
                          std::to_string(fields.size()),
                      line_no);
    }
    if (is_conllu_non_token(fields[0])) continue;
    if (fields[1].empty()) throw DataError("empty FORM column", line_no);
    current.tokens.push_back(Token{fields[1], fields[3]});
  }
  flush_sentence(current, corpus);
  return corpus;
}

Corpus read_conllu(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_conllu(in);
}

Corpus read_conll_columns(std::istream& in, std::size_t token_col,
                          std::size_t tag_col) {
  Corpus corpus;
  Sentence current;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) {
      flush_sentence(current, corpus);
      continue;
    }
    const auto fields = split_whitespace(line);
    if (fields.front() == "-DOCSTART-") continue;
    const std::size_t needed = std::max(token_col, tag_col) + 1;
    if (fields.size() < needed) {
      throw DataError("requested column " + std::to_string(needed - 1) +
                          " missing (found " + std::to_string(fields.size()) +
                          " columns)",
                      line_no);
    }
    current.tokens.push_back(Token{fields[token_col], fields[tag_col]});
  }
  flush_sentence(current, corpus);
  return corpus;
}

Corpus read_conll_columns(const std::filesystem::path& path,
                          std::size_t token_col, std::size_t tag_col) {
  auto in = open_input(path);
  return read_conll_columns(in, token_col, tag_col);
}

Corpus read_corpus(const std::filesystem::path& path, const CorpusLayout& layout) {
  if (layout.format == CorpusFormat::kConllu) return read_conllu(path);
  return read_conll_columns(path, layout.token_col, layout.tag_col);
}

void write_conllu(const Corpus& corpus, std::ostream& out) {
  for (const Sentence& s : corpus) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const Token& t = s.tokens[i];
      out << (i + 1) << '\t' << t.form << "\t_\t" << t.tag
          << "\t_\t_\t_\t_\t_\t_\n";
    }
    out << '\n';
  }
}

void write_conll_columns(const Corpus& corpus, std::ostream& out) {
  for (const Sentence& s : corpus) {
    for (const Token& t : s.tokens) out << t.form << ' ' << t.tag << '\n';
    out << '\n';
  }
}

void rewrite_tags(std::istream& in, std::ostream& out, const CorpusLayout& layout,
                  const Corpus& predicted) {
  std::size_t sentence = 0;
  std::size_t token = 0;
  auto next_tag = [&](std::size_t line_no) -> const std::string& {
    while (sentence < predicted.size() && token >= predicted[sentence].size()) {
      ++sentence;
      token = 0;
    }
    if (sentence >= predicted.size()) {
      throw DataError("more tokens in input than predictions", line_no);
    }
    return predicted[sentence].tokens[token++].tag;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) {
      out << line << '\n';
      continue;
    }
    if (layout.format == CorpusFormat::kConllu) {
      if (line.front() == '#') {
        out << line << '\n';
        continue;
      }
      auto fields = split_on(line, '\t');
      if (fields.size() != 10) {
        throw DataError("expected 10 tab-separated columns", line_no);
      }
      if (!is_conllu_non_token(fields[0])) fields[3] = next_tag(line_no);
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out << '\t';
        out << fields[i];
      }
      out << '\n';
    } else {
      auto fields = split_whitespace(line);
      if (fields.front() == "-DOCSTART-") {
        out << line << '\n';
        continue;
      }
      if (fields.size() <= layout.tag_col) {
        throw DataError("requested column missing", line_no);
      }
      fields[layout.tag_col] = next_tag(line_no);
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out << ' ';
        out << fields[i];
      }
      out << '\n';
    }
  }
}

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = 3;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    len = std::min(len, text.size() - i);
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> to_iobes(const std::vector<std::string>& tags) {
  // Normalize to IOB2 first: in IOB1 an I- tag opens a chunk when the
  // previous tag is O or of another type.
  std::vector<std::string> prefix(tags.size());
  std::vector<std::string> type(tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto [p, t] = split_prefix(tags[i], i);
    if (p != "O" && p != "B" && p != "I") {
      throw DataError("unexpected prefix in IOB tag '" + tags[i] +
                      "' at position " + std::to_string(i));
    }
    if (p == "I" && (i == 0 || prefix[i - 1] == "O" || type[i - 1] != t)) p = "B";
    prefix[i] = p;
    type[i] = t;
  }
  std::vector<std::string> out(tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (prefix[i] == "O") {
      out[i] = "O";
      continue;
    }
    const bool continues = i + 1 < tags.size() && prefix[i + 1] == "I" &&
                           type[i + 1] == type[i];
    if (prefix[i] == "B") {
      out[i] = (continues ? "B-" : "S-") + type[i];
    } else {
      out[i] = (continues ? "I-" : "E-") + type[i];
    }
  }
  return out;
}

void validate_iobes(const std::vector<std::string>& tags) {
  std::string open_type;  // non-empty while inside a multi-token chunk
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto [p, t] = split_prefix(tags[i], i);
    const bool inside = !open_type.empty();
    auto fail = [&] {
      throw DataError("inconsistent IOBES tag '" + tags[i] + "' at position " +
                      std::to_string(i));
    };
    if (p == "O" || p == "B" || p == "S") {
      if (inside) fail();
      if (p == "B") open_type = t;
    } else if (p == "I" || p == "E") {
      if (!inside || open_type != t) fail();
      if (p == "E") open_type.clear();
    } else {
      fail();
    }
  }
  if (!open_type.empty()) {
    throw DataError("unterminated IOBES chunk at end of sequence (position " +
                    std::to_string(tags.size()) + ")");
  }
}

std::vector<std::string> iobes_to_iob2(const std::vector<std::string>& tags) {
  validate_iobes(tags);
  std::vector<std::string> out(tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    if (tag == "O") {
      out[i] = tag;
    } else if (tag[0] == 'S') {
      out[i] = "B" + tag.substr(1);
    } else if (tag[0] == 'E') {
      out[i] = "I" + tag.substr(1);
    } else {
      out[i] = tag;
    }
  }
  return out;
}

Vocab Vocab::build(const Corpus& train, std::int64_t min_count) {
  std::map<std::string, std::int64_t> word_counts;
  std::map<std::string, std::int64_t> char_counts;
  std::map<std::string, std::int64_t> first_seen_tag;
  std::vector<std::string> tag_order;
  for (const Sentence& s : train) {
    for (const Token& t : s.tokens) {
      ++word_counts[lowercase(t.form)];
      for (const std::string& c : utf8_chars(t.form)) ++char_counts[c];
      if (first_seen_tag.emplace(t.tag, 0).second) tag_order.push_back(t.tag);
    }
  }

  Vocab v;
  v.words_ = {"<pad>", "<unk>"};
  v.chars_ = {"<pad>", "<unk>"};
  v.char_counts_ = {0, 0};
  for (const auto& [w, n] : word_counts) {
    v.frequency_[w] = n;
    if (n >= min_count) {
      v.words_.push_back(w);
    } else {
      v.unk_word_count_ += n;
    }
  }
  for (const auto& [c, n] : char_counts) {
    v.chars_.push_back(c);
    v.char_counts_.push_back(n);
  }
  // Tags sorted for a stable id assignment independent of corpus order.
  std::sort(tag_order.begin(), tag_order.end());
  v.tags_ = std::move(tag_order);
  v.reindex();
  return v;
}

void Vocab::reindex() {
  word_index_.clear();
  char_index_.clear();
  tag_index_.clear();
  for (std::size_t i = 2; i < words_.size(); ++i) word_index_[words_[i]] = i;
  for (std::size_t i = 2; i < chars_.size(); ++i) char_index_[chars_[i]] = i;
  for (std::size_t i = 0; i < tags_.size(); ++i) tag_index_[tags_[i]] = i;
}

std::size_t Vocab::word_id(std::string_view form) const {
  auto it = word_index_.find(lowercase(form));
  return it == word_index_.end() ? kUnk : it->second;
}

std::size_t Vocab::char_id(std::string_view ch) const {
  auto it = char_index_.find(std::string(ch));
  return it == char_index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocab::char_ids(std::string_view form) const {
  std::vector<std::size_t> ids;
  for (const std::string& c : utf8_chars(form)) ids.push_back(char_id(c));
  return ids;
}

std::size_t Vocab::tag_id(std::string_view tag) const {
  auto it = tag_index_.find(std::string(tag));
  if (it == tag_index_.end()) {
    throw DataError("tag '" + std::string(tag) + "' not in the training tag set");
  }
  return it->second;
}

bool Vocab::has_tag(std::string_view tag) const {
  return tag_index_.count(std::string(tag)) > 0;
}

bool Vocab::has_word(std::string_view form) const {
  return word_index_.count(lowercase(form)) > 0;
}

std::int64_t Vocab::frequency(std::string_view form) const {
  auto it = frequency_.find(lowercase(form));
  return it == frequency_.end() ? 0 : it->second;
}

std::vector<double> Vocab::word_weights() const {
  std::vector<double> w(words_.size(), 0.0);
  w[kUnk] = static_cast<double>(unk_word_count_);
  for (std::size_t i = 2; i < words_.size(); ++i) {
    w[i] = static_cast<double>(frequency_.at(words_[i]));
  }
  return w;
}

std::vector<double> Vocab::char_weights() const {
  return std::vector<double>(char_counts_.begin(), char_counts_.end());
}

Vocab::State Vocab::state() const {
  State s;
  s.words = words_;
  s.chars = chars_;
  s.tags = tags_;
  s.word_frequencies.assign(frequency_.begin(), frequency_.end());
  std::sort(s.word_frequencies.begin(), s.word_frequencies.end());
  s.char_counts = char_counts_;
  s.unk_word_count = unk_word_count_;
  return s;
}

Vocab Vocab::from_state(State state) {
  if (state.words.size() < 2 || state.chars.size() < 2 ||
      state.char_counts.size() != state.chars.size()) {
    throw DataError("corrupt vocabulary state");
  }
  Vocab v;
  v.words_ = std::move(state.words);
  v.chars_ = std::move(state.chars);
  v.tags_ = std::move(state.tags);
  for (auto& [w, n] : state.word_frequencies) v.frequency_[w] = n;
  v.char_counts_ = std::move(state.char_counts);
  v.unk_word_count_ = state.unk_word_count;
  v.reindex();
  for (std::size_t i = 2; i < v.words_.size(); ++i) {
    if (!v.frequency_.count(v.words_[i])) {
      throw DataError("vocabulary word without frequency: " + v.words_[i]);
    }
  }
  return v;
}

bool operator==(const Vocab& a, const Vocab& b) {
  return a.words_ == b.words_ && a.chars_ == b.chars_ && a.tags_ == b.tags_ &&
         a.frequency_ == b.frequency_ && a.char_counts_ == b.char_counts_ &&
         a.unk_word_count_ == b.unk_word_count_;
}

}  // namespace advtag
