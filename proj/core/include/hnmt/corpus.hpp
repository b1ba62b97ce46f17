#pragma once

#include "hnmt/tensor.hpp"
#include "hnmt/vocab.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace hnmt {

class Rng;

struct ParallelCorpus {
  std::vector<Sentence> source;
  std::vector<Sentence> target;

  std::size_t size() const { return source.size(); }
  bool empty() const { return source.empty(); }
  void add(Sentence src, Sentence tgt);
  /// Throws DataError unless both sides have equal count and no empty sentence.
  void validate() const;
};

std::vector<Sentence> read_sentences(const std::filesystem::path& path);
void write_sentences(const std::filesystem::path& path, std::span<const Sentence> sentences);
ParallelCorpus read_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt);
void write_parallel(const ParallelCorpus& corpus, const std::filesystem::path& src, const std::filesystem::path& tgt);

/// Padded id matrices for a group of sentence pairs.
///
/// Target rows are teacher-forcing pairs: tgt_in = BOS y1 .. ym and
/// tgt_out = y1 .. ym EOS. Padding uses EOS ids with mask 0.
struct Batch {
  Index size = 0;
  Index src_len = 0;
  Index tgt_len = 0;
  std::vector<std::size_t> pair_index;
  std::vector<int> src;
  std::vector<int> src_lengths;
  std::vector<int> tgt_in;
  std::vector<int> tgt_out;
  std::vector<int> tgt_lengths;
  Matrix src_mask;
  Matrix tgt_mask;

  int src_at(Index row, Index t) const { return src[static_cast<std::size_t>(row * src_len + t)]; }
  int tgt_in_at(Index row, Index t) const { return tgt_in[static_cast<std::size_t>(row * tgt_len + t)]; }
  int tgt_out_at(Index row, Index t) const { return tgt_out[static_cast<std::size_t>(row * tgt_len + t)]; }

  /// Word tokens carried by the batch (BOS/EOS and padding excluded).
  std::size_t num_word_tokens() const;
};

Batch make_batch(const ParallelCorpus& corpus, const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                 std::span<const std::size_t> indices);

/// Drops pairs with either side longer than max_len (0 keeps everything),
/// shuffles with rng when given, and groups into batches of batch_size.
std::vector<Batch> make_batches(const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                                const Vocabulary& tgt_vocab, std::size_t batch_size, std::size_t max_len,
                                Rng* rng);

}  // namespace hnmt
