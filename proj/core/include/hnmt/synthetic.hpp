#pragma once

#include "hnmt/corpus.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace hnmt {

enum class SyntheticTask { kCopy, kLexicon, kLexiconRare, kSwap };

std::optional<SyntheticTask> parse_task(std::string_view name);
std::string_view task_name(SyntheticTask task);

struct SyntheticOptions {
  SyntheticTask task = SyntheticTask::kLexicon;
  /// Source word types, rare ones included.
  std::size_t num_types = 47;
  /// Share of types that are rare; negative selects the task default
  /// (0.1 for lexicon_rare, 0 otherwise).
  double rare_fraction = -1.0;
  /// Probability that a sentence carries one rare word.
  double rare_rate = 0.25;
  std::size_t min_len = 4;
  std::size_t max_len = 10;
};

/// A toy language pair: source types, a bijective dictionary D and a sparse
/// first-order Markov chain over the common source types. The chain's
/// transition matrix is doubly stochastic, so every common type has the same
/// expected frequency, and rare types stay well below it.
class SyntheticLanguage {
 public:
  SyntheticLanguage(const SyntheticOptions& options, std::uint64_t seed);

  /// Draws from a stream that depends on both the language seed and seed.
  ParallelCorpus sample(std::size_t n, std::uint64_t seed) const;

  const SyntheticOptions& options() const { return options_; }
  const std::map<std::string, std::string>& dictionary() const { return dictionary_; }
  bool is_rare_source(std::string_view word) const;
  std::size_t num_common() const { return common_.size(); }
  std::size_t num_rare() const { return rare_.size(); }
  /// NMT vocabulary cap that keeps exactly the common types.
  std::size_t common_vocab_cap() const { return common_.size() + 3; }

 private:
  SyntheticOptions options_;
  std::uint64_t seed_ = 0;
  std::vector<std::string> common_;
  std::vector<std::string> rare_;
  std::map<std::string, std::string> dictionary_;
  std::vector<std::vector<std::size_t>> successors_;
};

/// Target side for a source sentence under the task's rule.
Sentence apply_task(SyntheticTask task, const Sentence& source, const std::map<std::string, std::string>& dictionary);

/// Convenience: language seeded by seed, n pairs drawn from stream 0.
ParallelCorpus gen_synthetic(SyntheticTask task, std::size_t n, std::uint64_t seed);

}  // namespace hnmt
