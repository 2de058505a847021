#include "advtag/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

namespace advtag {

namespace {

constexpr std::array<char, 8> kMagic = {'A', 'D', 'V', 'T', 'A', 'G', 'C', 'K'};
// Upper bound on any single count read back, to fail fast on corrupt input.
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 34;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void strings(const std::vector<std::string>& v) {
    u64(v.size());
    for (const auto& s : v) str(s);
  }
  void tensor(const Tensor& t) {
    u64(t.rank());
    for (std::size_t e : t.shape()) u64(e);
    for (double v : t.data()) f64(v);
  }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::uint64_t count() {
    const std::uint64_t n = u64();
    if (n > kMaxCount) throw CheckpointError("checkpoint: implausible count");
    return n;
  }
  std::string str() {
    std::string s(count(), '\0');
    in_.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!in_) throw CheckpointError("checkpoint: truncated string");
    return s;
  }
  std::vector<std::string> strings() {
    std::vector<std::string> v(count());
    for (auto& s : v) s = str();
    return v;
  }
  Tensor tensor() {
    Shape shape(count());
    for (auto& e : shape) e = count();
    Tensor t(shape);
    for (double& v : t.data()) v = f64();
    return t;
  }

 private:
  std::uint64_t le(int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      const int c = in_.get();
      if (c == std::char_traits<char>::eof()) {
        throw CheckpointError("checkpoint: unexpected end of file");
      }
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
  }
  std::istream& in_;
};

void write_table(Writer& w, const EmbeddingTable& table) {
  w.tensor(table.matrix);
  w.u64(table.weights.size());
  for (double v : table.weights) w.f64(v);
  w.u8(table.trainable ? 1 : 0);
}

EmbeddingTable read_table(Reader& r) {
  EmbeddingTable table;
  table.matrix = r.tensor();
  table.weights.resize(r.count());
  for (double& v : table.weights) v = r.f64();
  table.trainable = r.u8() != 0;
  table.validate();
  return table;
}

}  // namespace

void save_model(const Model& model, std::ostream& out) {
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  const TaggerArchitecture& a = model.arch;
  w.u64(a.char_dim);
  w.u64(a.char_hidden);
  w.u64(a.word_dim);
  w.u64(a.word_hidden);
  w.u64(a.tag_count);
  w.f64(a.dropout);
  w.str(model.tag_scheme);

  const Vocab::State vs = model.vocab.state();
  w.strings(vs.words);
  w.strings(vs.chars);
  w.strings(vs.tags);
  w.u64(vs.word_frequencies.size());
  for (const auto& [word, n] : vs.word_frequencies) {
    w.str(word);
    w.i64(n);
  }
  w.u64(vs.char_counts.size());
  for (std::int64_t n : vs.char_counts) w.i64(n);
  w.i64(vs.unk_word_count);

  write_table(w, model.params.words);
  write_table(w, model.params.chars);
  const auto tensors = model.params.dense_tensors();
  const auto& names = ModelParameters::dense_tensor_names();
  w.u64(tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    w.str(names[i]);
    w.tensor(*tensors[i]);
  }
  if (!out) throw CheckpointError("checkpoint: write failed");
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  save_model(model, out);
}

Model load_model(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw CheckpointError("checkpoint: bad magic");
  Reader r(in);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  Model m;
  m.arch.char_dim = r.u64();
  m.arch.char_hidden = r.u64();
  m.arch.word_dim = r.u64();
  m.arch.word_hidden = r.u64();
  m.arch.tag_count = r.u64();
  m.arch.dropout = r.f64();
  m.arch.validate();
  m.tag_scheme = r.str();

  Vocab::State vs;
  vs.words = r.strings();
  vs.chars = r.strings();
  vs.tags = r.strings();
  vs.word_frequencies.resize(r.count());
  for (auto& [word, n] : vs.word_frequencies) {
    word = r.str();
    n = r.i64();
  }
  vs.char_counts.resize(r.count());
  for (auto& n : vs.char_counts) n = r.i64();
  vs.unk_word_count = r.i64();
  m.vocab = Vocab::from_state(std::move(vs));

  m.params.words = read_table(r);
  m.params.chars = read_table(r);
  auto tensors = m.params.dense_tensors();
  const auto& names = ModelParameters::dense_tensor_names();
  if (r.count() != tensors.size()) throw CheckpointError("checkpoint: tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (r.str() != names[i]) throw CheckpointError("checkpoint: unexpected tensor " + names[i]);
    *tensors[i] = r.tensor();
  }

  // Structural consistency between architecture, vocabulary and tensors.
  const TaggerArchitecture& a = m.arch;
  const ModelParameters& p = m.params;
  const bool ok =
      a.tag_count == m.vocab.tag_count() &&
      p.words.matrix.shape() == Shape{m.vocab.word_count(), a.word_dim} &&
      p.chars.matrix.shape() == Shape{m.vocab.char_count(), a.char_dim} &&
      p.char_fwd.input_weights.shape() == Shape{4 * a.char_hidden, a.char_dim} &&
      p.char_bwd.input_weights.shape() == Shape{4 * a.char_hidden, a.char_dim} &&
      p.word_fwd.input_weights.shape() == Shape{4 * a.word_hidden, a.token_dim()} &&
      p.word_bwd.input_weights.shape() == Shape{4 * a.word_hidden, a.token_dim()} &&
      p.projection.shape() == Shape{a.tag_count, 2 * a.word_hidden} &&
      p.crf.transitions.shape() == Shape{a.tag_count, a.tag_count};
  if (!ok) throw CheckpointError("checkpoint: architecture and tensors disagree");
  return m;
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return load_model(in);
}

}  // namespace advtag
