#include "hnmt/corpus.hpp"

#include "hnmt/rng.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace hnmt {

void ParallelCorpus::add(Sentence src, Sentence tgt) {
  source.push_back(std::move(src));
  target.push_back(std::move(tgt));
}

void ParallelCorpus::validate() const {
  if (source.size() != target.size()) {
    throw DataError("parallel corpus: " + std::to_string(source.size()) + " source vs " +
                    std::to_string(target.size()) + " target sentences");
  }
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i].empty() || target[i].empty()) {
      throw DataError("parallel corpus: empty sentence at line " + std::to_string(i + 1));
    }
  }
}

std::vector<Sentence> read_sentences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<Sentence> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(tokenize(line));
  return out;
}

void write_sentences(const std::filesystem::path& path, std::span<const Sentence> sentences) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& s : sentences) out << join(s) << '\n';
}

ParallelCorpus read_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt) {
  ParallelCorpus c;
  c.source = read_sentences(src);
  c.target = read_sentences(tgt);
  c.validate();
  return c;
}

void write_parallel(const ParallelCorpus& corpus, const std::filesystem::path& src,
                    const std::filesystem::path& tgt) {
  write_sentences(src, corpus.source);
  write_sentences(tgt, corpus.target);
}

std::size_t Batch::num_word_tokens() const {
  std::size_t n = 0;
  for (Index i = 0; i < size; ++i) {
    n += static_cast<std::size_t>(src_lengths[static_cast<std::size_t>(i)]);
    n += static_cast<std::size_t>(tgt_lengths[static_cast<std::size_t>(i)] - 1);
  }
  return n;
}

Batch make_batch(const ParallelCorpus& corpus, const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                 std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: no sentences");
  Batch b;
  b.size = static_cast<Index>(indices.size());
  b.pair_index.assign(indices.begin(), indices.end());
  for (std::size_t k : indices) {
    b.src_len = std::max<Index>(b.src_len, static_cast<Index>(corpus.source.at(k).size()));
    b.tgt_len = std::max<Index>(b.tgt_len, static_cast<Index>(corpus.target.at(k).size()) + 1);
  }
  b.src.assign(static_cast<std::size_t>(b.size * b.src_len), Vocabulary::kEos);
  b.tgt_in.assign(static_cast<std::size_t>(b.size * b.tgt_len), Vocabulary::kEos);
  b.tgt_out.assign(static_cast<std::size_t>(b.size * b.tgt_len), Vocabulary::kEos);
  b.src_mask = Matrix::Zero(b.size, b.src_len);
  b.tgt_mask = Matrix::Zero(b.size, b.tgt_len);
  for (Index i = 0; i < b.size; ++i) {
    const Sentence& s = corpus.source[indices[static_cast<std::size_t>(i)]];
    const Sentence& t = corpus.target[indices[static_cast<std::size_t>(i)]];
    if (s.empty()) throw DataError("make_batch: empty source sentence");
    for (std::size_t j = 0; j < s.size(); ++j) {
      b.src[static_cast<std::size_t>(i * b.src_len) + j] = src_vocab.encode(s[j]);
      b.src_mask(i, static_cast<Index>(j)) = 1.0;
    }
    b.tgt_in[static_cast<std::size_t>(i * b.tgt_len)] = Vocabulary::kBos;
    for (std::size_t j = 0; j < t.size(); ++j) {
      int id = tgt_vocab.encode(t[j]);
      b.tgt_out[static_cast<std::size_t>(i * b.tgt_len) + j] = id;
      b.tgt_in[static_cast<std::size_t>(i * b.tgt_len) + j + 1] = id;
    }
    b.tgt_out[static_cast<std::size_t>(i * b.tgt_len) + t.size()] = Vocabulary::kEos;
    for (std::size_t j = 0; j <= t.size(); ++j) b.tgt_mask(i, static_cast<Index>(j)) = 1.0;
    b.src_lengths.push_back(static_cast<int>(s.size()));
    b.tgt_lengths.push_back(static_cast<int>(t.size() + 1));
  }
  return b;
}

std::vector<Batch> make_batches(const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                                const Vocabulary& tgt_vocab, std::size_t batch_size, std::size_t max_len,
                                Rng* rng) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  corpus.validate();
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (max_len == 0 || (corpus.source[i].size() <= max_len && corpus.target[i].size() <= max_len)) {
      keep.push_back(i);
    }
  }
  if (keep.empty()) throw DataError("make_batches: every sentence pair was filtered out");
  if (rng) rng->shuffle(keep);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < keep.size(); start += batch_size) {
    std::size_t end = std::min(keep.size(), start + batch_size);
    out.push_back(make_batch(corpus, src_vocab, tgt_vocab, std::span(keep).subspan(start, end - start)));
  }
  return out;
}

}  // namespace hnmt
