#include "advtag/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace advtag {

namespace {

void check_aligned(const Corpus& gold, const Corpus& predicted) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("gold has " + std::to_string(gold.size()) +
                                " sentences, prediction has " +
                                std::to_string(predicted.size()));
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != predicted[i].size()) {
      throw std::invalid_argument("sentence " + std::to_string(i) +
                                  " length differs between gold and prediction");
    }
  }
}

struct ParsedTag {
  char prefix;  // 'O', 'B', 'I', 'E', 'S'
  std::string type;
};

ParsedTag parse_tag(const std::string& tag, std::size_t position) {
  if (tag == "O") return {'O', ""};
  if (tag.size() < 3 || tag[1] != '-' ||
      std::string("BIES").find(tag[0]) == std::string::npos) {
    throw DataError("invalid chunk tag '" + tag + "' at position " +
                    std::to_string(position));
  }
  return {tag[0], tag.substr(2)};
}

std::vector<Span> decode(const std::vector<std::string>& tags, ChunkScheme scheme,
                         bool repair) {
  std::vector<Span> spans;
  std::optional<Span> open;
  auto close_before = [&](std::size_t i) {
    if (open) {
      open->end = i - 1;
      spans.push_back(*open);
      open.reset();
    }
  };
  auto fail = [&](std::size_t i) {
    throw DataError("inconsistent chunk tag '" + tags[i] + "' at position " +
                    std::to_string(i));
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const ParsedTag p = parse_tag(tags[i], i);
    if (scheme == ChunkScheme::kIob2 && (p.prefix == 'E' || p.prefix == 'S')) fail(i);
    const bool continues = open && open->type == p.type;
    switch (p.prefix) {
      case 'O':
        if (open && scheme == ChunkScheme::kIobes && !repair) fail(i);
        close_before(i);
        break;
      case 'B':
        if (open && scheme == ChunkScheme::kIobes && !repair) fail(i);
        close_before(i);
        open = Span{p.type, i, i};
        break;
      case 'S':
        if (open && !repair) fail(i);
        close_before(i);
        spans.push_back(Span{p.type, i, i});
        break;
      case 'I':
        if (!continues) {
          if (!repair) fail(i);
          close_before(i);
          open = Span{p.type, i, i};
        }
        break;
      case 'E':
        if (!continues) {
          if (!repair) fail(i);
          close_before(i);
          open = Span{p.type, i, i};
        }
        open->end = i;
        spans.push_back(*open);
        open.reset();
        break;
    }
  }
  if (open) {
    if (scheme == ChunkScheme::kIobes && !repair) {
      throw DataError("unterminated chunk at end of sequence (position " +
                      std::to_string(tags.size()) + ")");
    }
    close_before(tags.size());
  }
  return spans;
}

std::size_t bucket_index(const std::vector<Bucket>& buckets, std::int64_t freq) {
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    if (freq >= buckets[b].lower && (buckets[b].upper < 0 || freq < buckets[b].upper)) {
      return b;
    }
  }
  return buckets.size() - 1;
}

std::string cell(double v, int precision) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

void print_grid(std::ostream& out, const std::vector<std::vector<std::string>>& grid) {
  std::vector<std::size_t> width;
  for (const auto& row : grid) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(width[c])) << row[c];
      }
    }
    out << '\n';
  }
}

}  // namespace

std::vector<Span> decode_spans(const std::vector<std::string>& tags, ChunkScheme scheme) {
  return decode(tags, scheme, false);
}

std::vector<Span> decode_spans_repaired(const std::vector<std::string>& tags,
                                        ChunkScheme scheme) {
  return decode(tags, scheme, true);
}

ChunkScores chunk_f1(const std::vector<std::vector<std::string>>& gold,
                     const std::vector<std::vector<std::string>>& predicted,
                     ChunkScheme scheme) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("chunk_f1: sentence counts differ");
  }
  ChunkScores s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != predicted[i].size()) {
      throw std::invalid_argument("chunk_f1: sentence " + std::to_string(i) +
                                  " length differs");
    }
    const auto g = decode_spans(gold[i], scheme);
    const auto p = decode_spans_repaired(predicted[i], scheme);
    const std::set<Span> gs(g.begin(), g.end());
    s.gold_spans += g.size();
    s.predicted_spans += p.size();
    for (const Span& span : p) s.matched += gs.count(span);
  }
  s.precision = s.predicted_spans == 0
                    ? 0.0
                    : static_cast<double>(s.matched) / static_cast<double>(s.predicted_spans);
  s.recall = s.gold_spans == 0
                 ? 0.0
                 : static_cast<double>(s.matched) / static_cast<double>(s.gold_spans);
  s.f1 = (s.precision + s.recall) == 0.0
             ? 0.0
             : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

ChunkScores chunk_f1(const Corpus& gold, const Corpus& predicted, ChunkScheme scheme) {
  check_aligned(gold, predicted);
  std::vector<std::vector<std::string>> g;
  std::vector<std::vector<std::string>> p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    g.push_back(gold[i].tags());
    p.push_back(predicted[i].tags());
  }
  return chunk_f1(g, p, scheme);
}

double token_accuracy(const Corpus& gold, const Corpus& predicted) {
  return evaluate(gold, predicted).token_accuracy;
}

double sentence_accuracy(const Corpus& gold, const Corpus& predicted) {
  return evaluate(gold, predicted).sentence_accuracy;
}

EvalReport evaluate(const Corpus& gold, const Corpus& predicted,
                    std::optional<ChunkScheme> chunk_scheme) {
  check_aligned(gold, predicted);
  EvalReport r;
  std::size_t correct = 0;
  std::size_t whole = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    bool all = true;
    for (std::size_t t = 0; t < gold[i].size(); ++t) {
      const std::string& g = gold[i].tokens[t].tag;
      const std::string& p = predicted[i].tokens[t].tag;
      ++r.confusion[{g, p}];
      if (g == p) {
        ++correct;
      } else {
        all = false;
      }
      ++r.tokens;
    }
    whole += all;
  }
  if (r.tokens == 0) throw std::invalid_argument("evaluation over zero tokens");
  r.sentences = gold.size();
  r.token_accuracy = static_cast<double>(correct) / static_cast<double>(r.tokens);
  r.sentence_accuracy = static_cast<double>(whole) / static_cast<double>(r.sentences);
  if (chunk_scheme) r.chunks = chunk_f1(gold, predicted, *chunk_scheme);
  return r;
}

std::vector<Bucket> make_buckets(const std::vector<std::int64_t>& boundaries) {
  std::vector<Bucket> buckets;
  buckets.push_back(Bucket{"0", 0, 1});
  std::int64_t lower = 1;
  for (std::int64_t b : boundaries) {
    if (b <= lower) throw std::invalid_argument("bucket boundaries must increase past 1");
    buckets.push_back(Bucket{std::to_string(lower) + "-" + std::to_string(b), lower, b});
    lower = b;
  }
  buckets.push_back(Bucket{std::to_string(lower) + "-", lower, -1});
  return buckets;
}

BucketReport frequency_buckets(const Vocab& vocab, const Corpus& gold,
                               const Corpus& predicted,
                               const std::vector<std::int64_t>& boundaries) {
  check_aligned(gold, predicted);
  BucketReport r;
  r.buckets = make_buckets(boundaries);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t t = 0; t < gold[i].size(); ++t) {
      Bucket& b = r.buckets[bucket_index(r.buckets, vocab.frequency(gold[i].tokens[t].form))];
      ++b.count;
      b.correct += gold[i].tokens[t].tag == predicted[i].tokens[t].tag;
      ++r.total;
    }
  }
  return r;
}

BucketReport neighbor_accuracy(const Vocab& vocab, const Corpus& gold,
                               const Corpus& predicted,
                               const std::vector<std::int64_t>& boundaries) {
  check_aligned(gold, predicted);
  BucketReport r;
  r.buckets = make_buckets(boundaries);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto& g = gold[i].tokens;
    const auto& p = predicted[i].tokens;
    for (std::size_t t = 0; t < g.size(); ++t) {
      Bucket& b = r.buckets[bucket_index(r.buckets, vocab.frequency(g[t].form))];
      // t - 1 wraps around at the left edge and fails the bound check.
      for (std::size_t nb : {t - 1, t + 1}) {
        if (nb >= g.size()) continue;
        ++b.count;
        b.correct += g[nb].tag == p[nb].tag;
        ++r.total;
      }
    }
  }
  return r;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

TightnessReport cluster_tightness(const EmbeddingTable& table,
                                  const NormalizationStats* stats, const Vocab& vocab,
                                  const Corpus& test) {
  // word key -> set of gold tags observed in the test data
  std::map<std::string, std::set<std::string>> tags_of;
  for (const Sentence& s : test) {
    for (const Token& t : s.tokens) tags_of[lowercase(t.form)].insert(t.tag);
  }
  std::map<std::string, std::vector<std::size_t>> clusters;
  for (const auto& [word, tags] : tags_of) {
    if (tags.size() != 1 || !vocab.has_word(word)) continue;
    clusters[*tags.begin()].push_back(vocab.word_id(word));
  }

  TightnessReport r;
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& [tag, ids] : clusters) {
    std::vector<Tensor> vecs;
    for (std::size_t id : ids) {
      if (stats != nullptr) {
        vecs.push_back(normalized_row(table, *stats, id));
      } else {
        vecs.push_back(Tensor::vector(std::vector<double>(table.matrix.row(id).begin(),
                                                          table.matrix.row(id).end())));
      }
    }
    ClusterTightness c{tag, ids.size(), 0.0};
    if (vecs.size() >= 2) {
      double total = 0.0;
      std::size_t pairs = 0;
      for (std::size_t a = 0; a < vecs.size(); ++a) {
        for (std::size_t b = a + 1; b < vecs.size(); ++b) {
          total += cosine_similarity(vecs[a].data(), vecs[b].data());
          ++pairs;
        }
      }
      c.tightness = total / static_cast<double>(pairs);
      sum += c.tightness;
      ++counted;
    }
    r.clusters.push_back(c);
  }
  r.overall = counted == 0 ? 0.0 : sum / static_cast<double>(counted);
  return r;
}

std::string format_percent(double rate) { return cell(100.0 * rate, 2); }

void print_eval_table(std::ostream& out,
                      const std::vector<std::pair<std::string, EvalReport>>& rows) {
  const bool chunks = std::any_of(rows.begin(), rows.end(),
                                  [](const auto& r) { return r.second.chunks.has_value(); });
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header = {"", "Token Acc.", "Sentence-level Acc."};
  if (chunks) header.insert(header.end(), {"Precision", "Recall", "F1"});
  grid.push_back(header);
  for (const auto& [name, r] : rows) {
    std::vector<std::string> row = {name, format_percent(r.token_accuracy),
                                    format_percent(r.sentence_accuracy)};
    if (chunks) {
      if (r.chunks) {
        row.insert(row.end(), {format_percent(r.chunks->precision),
                               format_percent(r.chunks->recall),
                               format_percent(r.chunks->f1)});
      } else {
        row.insert(row.end(), {"--", "--", "--"});
      }
    }
    grid.push_back(row);
  }
  print_grid(out, grid);
}

void print_bucket_table(std::ostream& out, const std::string& title,
                        const std::vector<std::pair<std::string, BucketReport>>& rows) {
  if (rows.empty()) return;
  const BucketReport& first = rows.front().second;
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header = {title};
  for (const Bucket& b : first.buckets) header.push_back(b.label);
  header.push_back("Total");
  grid.push_back(header);
  std::vector<std::string> counts = {"# Tokens"};
  for (const Bucket& b : first.buckets) counts.push_back(std::to_string(b.count));
  counts.push_back(std::to_string(first.total));
  grid.push_back(counts);
  for (const auto& [name, r] : rows) {
    std::vector<std::string> row = {name};
    std::size_t correct = 0;
    for (const Bucket& b : r.buckets) {
      row.push_back(b.count == 0 ? "--" : format_percent(b.accuracy()));
      correct += b.correct;
    }
    row.push_back(r.total == 0 ? "--"
                               : format_percent(static_cast<double>(correct) /
                                                static_cast<double>(r.total)));
    grid.push_back(row);
  }
  print_grid(out, grid);
}

void print_tightness_table(
    std::ostream& out, const std::vector<std::pair<std::string, TightnessReport>>& rows) {
  if (rows.empty()) return;
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header = {"POS Cluster"};
  for (const ClusterTightness& c : rows.front().second.clusters) header.push_back(c.tag);
  header.push_back("Avg.");
  grid.push_back(header);
  for (const auto& [name, r] : rows) {
    std::vector<std::string> row = {name};
    for (std::size_t h = 1; h + 1 < header.size(); ++h) {
      const auto it = std::find_if(r.clusters.begin(), r.clusters.end(),
                                   [&](const ClusterTightness& c) { return c.tag == header[h]; });
      row.push_back(it != r.clusters.end() && it->members >= 2 ? cell(it->tightness, 3) : "--");
    }
    row.push_back(cell(r.overall, 3));
    grid.push_back(row);
  }
  print_grid(out, grid);
}

}  // namespace advtag
