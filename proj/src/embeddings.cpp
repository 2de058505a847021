#include "advtag/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace advtag {

void EmbeddingTable::validate() const {
  if (matrix.rank() != 2) throw std::invalid_argument("embedding table must be a matrix");
  if (weights.size() != matrix.rows()) {
    throw std::invalid_argument("embedding weights do not match row count");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("negative embedding weight");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("embedding weights sum to zero");
}

EmbeddingTable init_random(std::size_t rows, std::size_t dim,
                           std::vector<double> weights, std::mt19937_64& rng) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be >= 1");
  const double bound = std::sqrt(3.0 / static_cast<double>(dim));
  std::uniform_real_distribution<double> dist(-bound, bound);
  EmbeddingTable table;
  table.matrix = Tensor({rows, dim});
  for (double& v : table.matrix.data()) v = dist(rng);
  table.weights = std::move(weights);
  return table;
}

namespace {

std::vector<double> word_weights_or_uniform(const Vocab& vocab) {
  std::vector<double> w = vocab.word_weights();
  double total = 0.0;
  for (double x : w) total += x;
  if (total > 0.0) return w;
  // Empty training data: fall back to uniform over non-PAD rows.
  for (std::size_t i = 1; i < w.size(); ++i) w[i] = 1.0;
  return w;
}

}  // namespace

EmbeddingTable init_word_table(const Vocab& vocab, std::size_t dim,
                               std::mt19937_64& rng) {
  return init_random(vocab.word_count(), dim, word_weights_or_uniform(vocab), rng);
}

EmbeddingTable init_char_table(const Vocab& vocab, std::size_t dim,
                               std::mt19937_64& rng, bool frequency_weighted) {
  std::vector<double> w;
  if (frequency_weighted) {
    w = vocab.char_weights();
  } else {
    w.assign(vocab.char_count(), 1.0);
    w[Vocab::kPad] = 0.0;
  }
  return init_random(vocab.char_count(), dim, std::move(w), rng);
}

EmbeddingTable load_pretrained(std::istream& in, const Vocab& vocab,
                               std::size_t dim, std::mt19937_64& rng) {
  EmbeddingTable table = init_word_table(vocab, dim, rng);
  std::unordered_set<std::size_t> filled;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> values;
    std::string tok;
    while (fields >> tok) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw DataError("malformed number '" + tok + "'", line_no);
      }
      values.push_back(v);
    }
    if (values.size() != dim) {
      throw DataError("expected " + std::to_string(dim) + " values, found " +
                          std::to_string(values.size()),
                      line_no);
    }
    const std::string key = lowercase(word);
    if (!vocab.has_word(key)) continue;
    const std::size_t id = vocab.word_id(key);
    if (!filled.insert(id).second) continue;
    std::copy(values.begin(), values.end(), table.matrix.row(id).begin());
  }
  return table;
}

EmbeddingTable load_pretrained(const std::filesystem::path& path,
                               const Vocab& vocab, std::size_t dim,
                               std::mt19937_64& rng) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return load_pretrained(in, vocab, dim, rng);
}

void write_embeddings(const EmbeddingTable& table, const Vocab& vocab,
                      std::ostream& out) {
  char buf[64];
  for (std::size_t id = 2; id < table.rows(); ++id) {
    out << vocab.word(id);
    for (double v : table.matrix.row(id)) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out << ' ' << std::string_view(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

NormalizationStats compute_stats(const EmbeddingTable& table) {
  table.validate();
  const std::size_t d = table.dim();
  NormalizationStats stats;
  stats.mean.assign(d, 0.0);
  stats.stddev.assign(d, 0.0);
  double total = 0.0;
  for (double w : table.weights) total += w;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const double w = table.weights[r];
    if (w == 0.0) continue;
    const auto row = table.matrix.row(r);
    for (std::size_t j = 0; j < d; ++j) stats.mean[j] += w * row[j];
  }
  for (double& m : stats.mean) m /= total;
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const double w = table.weights[r];
    if (w == 0.0) continue;
    const auto row = table.matrix.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - stats.mean[j];
      var[j] += w * c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    stats.stddev[j] = std::max(std::sqrt(var[j] / total), kStdFloor);
  }
  return stats;
}

Tensor normalized_row(const EmbeddingTable& table, const NormalizationStats& stats,
                      std::size_t id) {
  if (id >= table.rows()) {
    throw std::out_of_range("embedding id " + std::to_string(id) +
                            " out of range (" + std::to_string(table.rows()) +
                            " rows)");
  }
  const auto row = table.matrix.row(id);
  Tensor out({table.dim()});
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = (row[j] - stats.mean[j]) / stats.stddev[j];
  }
  return out;
}

Var normalized_lookup(Var table, const NormalizationStats& stats, std::size_t id) {
  if (id >= table.value().rows()) {
    throw std::out_of_range("embedding id " + std::to_string(id) + " out of range");
  }
  Tape& tape = *table.tape();
  Tensor inv_std({stats.dim()});
  for (std::size_t j = 0; j < stats.dim(); ++j) inv_std[j] = 1.0 / stats.stddev[j];
  const Var centered = sub(gather(table, id), tape.constant(Tensor::vector(stats.mean)));
  return mul(centered, tape.constant(std::move(inv_std)));
}

void accumulate_raw_gradient(const NormalizationStats& stats,
                             std::span<const double> normalized_grad,
                             std::span<double> raw_grad) {
  for (std::size_t j = 0; j < raw_grad.size(); ++j) {
    raw_grad[j] += normalized_grad[j] / stats.stddev[j];
  }
}

}  // namespace advtag
