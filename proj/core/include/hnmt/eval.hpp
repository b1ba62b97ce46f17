#pragma once

#include "hnmt/vocab.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace hnmt {

struct BleuReport {
  double bleu = 0.0;
  std::array<double, 4> precision{};
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 0.0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;

  std::string to_text() const;
  std::string to_json() const;
};

/// Corpus-level BLEU-4 over lower-cased tokens: n-gram counts clipped by the
/// maximum count in any reference, brevity penalty against the closest
/// reference length (shorter wins ties), no smoothing.
BleuReport bleu(std::span<const Sentence> candidates, std::span<const std::vector<Sentence>> references);
/// Single-reference convenience overload.
BleuReport bleu(std::span<const Sentence> candidates, std::span<const Sentence> references);

/// Position-wise matches over the common prefix of each pair, summed over the
/// corpus and divided by the total reference length.
double token_accuracy(std::span<const Sentence> candidates, std::span<const Sentence> references);

}  // namespace hnmt
