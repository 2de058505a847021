#include "advtag/synthetic.hpp"

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace advtag {

namespace {

constexpr double kRowTolerance = 1e-12;

void check_distribution(const std::vector<double>& p, const std::string& what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw std::invalid_argument(what + ": negative probability");
    total += v;
  }
  if (std::abs(total - 1.0) > kRowTolerance) {
    throw std::invalid_argument(what + ": probabilities sum to " + std::to_string(total));
  }
}

std::size_t draw(const std::vector<double>& p, std::mt19937_64& rng) {
  // Inverse CDF on a uniform draw keeps the sampler independent of
  // library-specific discrete_distribution internals.
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return p.size() - 1;
}

void normalize(std::vector<double>& p) {
  double total = 0.0;
  for (double v : p) total += v;
  for (double& v : p) v /= total;
}

std::string tag_name(std::size_t i) { return "T" + std::to_string(i); }

}  // namespace

void HmmSpec::validate() const {
  const std::size_t k = tags.size();
  if (k == 0) throw std::invalid_argument("hmm: empty tag set");
  if (initial.size() != k || transitions.size() != k || emissions.size() != k) {
    throw std::invalid_argument("hmm: inconsistent tag count");
  }
  check_distribution(initial, "hmm initial");
  for (std::size_t i = 0; i < k; ++i) {
    if (transitions[i].size() != k) throw std::invalid_argument("hmm: ragged transitions");
    check_distribution(transitions[i], "hmm transition row " + std::to_string(i));
    if (emissions[i].empty()) {
      throw std::invalid_argument("hmm: empty lexicon for tag " + tags[i]);
    }
    std::vector<double> w;
    for (const WeightedWord& ww : emissions[i]) {
      if (ww.word.empty()) throw std::invalid_argument("hmm: empty word");
      w.push_back(ww.weight);
    }
    check_distribution(w, "hmm emissions of " + tags[i]);
  }
}

Corpus generate(const HmmSpec& spec, std::size_t n_sentences, std::size_t max_len) {
  spec.validate();
  if (max_len == 0) throw std::invalid_argument("hmm: max_len must be >= 1");
  std::mt19937_64 rng(spec.seed);
  std::vector<std::vector<double>> emission_probs;
  for (const auto& lex : spec.emissions) {
    std::vector<double> w;
    for (const WeightedWord& ww : lex) w.push_back(ww.weight);
    emission_probs.push_back(std::move(w));
  }
  std::uniform_int_distribution<std::size_t> length(1, max_len);
  Corpus corpus;
  corpus.reserve(n_sentences);
  for (std::size_t s = 0; s < n_sentences; ++s) {
    const std::size_t n = length(rng);
    Sentence sentence;
    std::size_t tag = draw(spec.initial, rng);
    for (std::size_t t = 0; t < n; ++t) {
      if (t > 0) tag = draw(spec.transitions[tag], rng);
      const std::size_t w = draw(emission_probs[tag], rng);
      sentence.tokens.push_back(Token{spec.emissions[tag][w].word, spec.tags[tag]});
    }
    corpus.push_back(std::move(sentence));
  }
  return corpus;
}

HmmSpec zipfian_spec(std::size_t tag_count, std::size_t lexicon_size,
                     std::uint64_t seed, double ambiguity) {
  if (tag_count == 0 || lexicon_size < tag_count) {
    throw std::invalid_argument("zipfian_spec: need at least one word per tag");
  }
  if (!(ambiguity >= 0.0 && ambiguity < 1.0)) {
    throw std::invalid_argument("zipfian_spec: ambiguity must lie in [0, 1)");
  }
  static const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                  "p", "r", "s", "t", "v", "z", "br", "st"};
  static const char* kVowels[] = {"a", "e", "i", "o", "u"};
  static const char* kSuffixes[] = {"ek", "ul", "on", "ir", "ash", "em", "ov",
                                    "ix", "ud", "al", "et", "yn", "or", "ib"};
  std::mt19937_64 rng(seed);
  HmmSpec spec;
  spec.seed = seed;

  for (std::size_t i = 0; i < tag_count; ++i) spec.tags.push_back(tag_name(i));

  // Transitions: a few preferred successors per tag, smoothed.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < tag_count; ++i) {
    std::vector<double> row(tag_count);
    for (double& v : row) v = 0.05 + std::pow(unit(rng), 4.0);
    normalize(row);
    spec.transitions.push_back(std::move(row));
  }
  spec.initial.assign(tag_count, 1.0 / static_cast<double>(tag_count));

  // Distinct stems; each tag's words end in that tag's suffix.
  std::set<std::string> used;
  std::vector<std::vector<std::string>> lexicon(tag_count);
  std::uniform_int_distribution<std::size_t> onset(0, std::size(kOnsets) - 1);
  std::uniform_int_distribution<std::size_t> vowel(0, std::size(kVowels) - 1);
  std::uniform_int_distribution<std::size_t> syllables(1, 3);
  for (std::size_t w = 0; w < lexicon_size; ++w) {
    const std::size_t tag = w % tag_count;
    std::string suffix = kSuffixes[tag % std::size(kSuffixes)];
    if (tag >= std::size(kSuffixes)) suffix += std::to_string(tag / std::size(kSuffixes));
    std::string word;
    do {
      word.clear();
      const std::size_t n = syllables(rng);
      for (std::size_t s = 0; s < n; ++s) {
        word += kOnsets[onset(rng)];
        word += kVowels[vowel(rng)];
      }
      word += suffix;
    } while (!used.insert(word).second);
    lexicon[tag].push_back(word);
  }

  for (std::size_t tag = 0; tag < tag_count; ++tag) {
    std::vector<WeightedWord> lex;
    double total = 0.0;
    for (std::size_t r = 0; r < lexicon[tag].size(); ++r) {
      const double w = 1.0 / static_cast<double>(r + 1);
      lex.push_back(WeightedWord{lexicon[tag][r], w});
      total += w;
    }
    for (WeightedWord& ww : lex) ww.weight *= (1.0 - ambiguity) / total;
    if (ambiguity > 0.0) {
      // Borrow the neighbor tag's rarer half with Zipfian weights.
      const auto& other = lexicon[(tag + 1) % tag_count];
      const std::size_t start = other.size() / 2;
      double btotal = 0.0;
      std::vector<WeightedWord> borrowed;
      for (std::size_t r = start; r < other.size(); ++r) {
        const double w = 1.0 / static_cast<double>(r - start + 1);
        borrowed.push_back(WeightedWord{other[r], w});
        btotal += w;
      }
      for (WeightedWord& ww : borrowed) {
        ww.weight *= ambiguity / btotal;
        lex.push_back(ww);
      }
    }
    // Exact renormalization against rounding drift.
    double sum = 0.0;
    for (const WeightedWord& ww : lex) sum += ww.weight;
    for (WeightedWord& ww : lex) ww.weight /= sum;
    spec.emissions.push_back(std::move(lex));
  }
  spec.validate();
  return spec;
}

HmmSpec bijective_spec(std::size_t tag_count, std::uint64_t seed) {
  HmmSpec spec = zipfian_spec(tag_count, tag_count, seed, 0.0);
  return spec;
}

}  // namespace advtag
