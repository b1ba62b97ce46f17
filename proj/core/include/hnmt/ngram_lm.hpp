#pragma once

#include "hnmt/vocab.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hnmt::smt {

/// Jelinek-Mercer interpolated n-gram model.
///
/// p(w | h) = sum_k lambda_k p_ML(w | h_k) over the levels whose context h_k
/// was observed (weights renormalized over those levels). The unigram level
/// mixes in a uniform floor so every token, <unk> included, has mass:
/// p_1(w) = (1 - floor) c(w) / N + floor / |V|. Histories are left-padded
/// with <s>; sentence ends are not modelled since only words get scored.
class NGramLM {
 public:
  struct Options {
    int order = 4;
    /// Highest order first; empty selects default_weights(order).
    std::vector<double> weights;
    double floor = 0.01;
  };

  /// (0.5, 0.3, 0.15, 0.05) for order 4; lower orders keep the tail of that
  /// sequence, renormalized.
  static std::vector<double> default_weights(int order);

  /// With map_vocab, tokens outside it are counted as <unk>.
  static NGramLM train(std::span<const Sentence> sentences, const Options& options,
                       const Vocabulary* map_vocab = nullptr);

  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;

  int index(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  /// Ids that can be predicted: every token except <s>.
  std::vector<int> predictable() const;
  int order() const { return options_.order; }
  const Options& options() const { return options_; }

  /// history holds preceding ids, most recent last; only the last order-1 are used.
  double prob(std::span<const int> history, int word) const;
  double logprob(std::span<const int> history, int word) const;
  double sentence_logprob(const Sentence& s) const;
  double perplexity(std::span<const Sentence> sentences) const;

  std::string serialize() const;
  static NGramLM deserialize(std::string_view text);

 private:
  using Key = std::uint64_t;
  Key pack(std::span<const int> ids) const;
  int intern(const std::string& token);
  void count(std::span<const int> padded, std::size_t pos, int level, double c);
  void validate_options() const;

  Options options_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  // ngram_[k-1]: k-gram counts; context_[k-1]: counts of their (k-1)-word contexts.
  std::vector<std::unordered_map<Key, double>> ngram_;
  std::vector<std::unordered_map<Key, double>> context_;
};

}  // namespace hnmt::smt
