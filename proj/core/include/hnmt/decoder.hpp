#pragma once

#include "hnmt/advisor.hpp"
#include "hnmt/hybrid.hpp"
#include "hnmt/smt_model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hnmt {

struct DecodeOptions {
  std::size_t beam = 10;
  std::size_t max_len = 0;  // tokens including EOS; 0 selects 2 * |src| + 5
  std::optional<double> fixed_gate;
  bool pseudo_recs = false;
  bool unk_replace = true;
  std::size_t n_rec = 25;
  std::uint64_t seed = 0;  // pseudo recommendations
  bool trace = false;      // keep per-step recommendation lists

  void validate() const;
};

struct StepRecord {
  int token = 0;
  double logprob = 0.0;
  double gate = 0.0;  // weight given to the SMT distribution at this step
  std::string coverage;
  std::vector<smt::Recommendation> recs;  // only with DecodeOptions::trace
  std::optional<smt::Recommendation> replacement;  // UNK steps with recommendations
  bool forced_eos = false;
};

struct Hypothesis {
  std::vector<int> tokens;  // NMT ids, ending with EOS once finished
  double score = 0.0;
  smt::CoverageVector cv;
  std::vector<double> prev_att;
  std::vector<int> prefix;  // SMT target ids
  std::vector<StepRecord> steps;
  bool forced_eos = false;
};

struct Translation {
  Hypothesis best;
  Sentence output;
  std::size_t unk_left = 0;
};

/// Beam search over the fused distribution. Without an SMT model, or for a
/// model that has no advisor, this is plain NMT beam search.
class Translator {
 public:
  Translator(HybridModel& model, const smt::SmtModel* smt, DecodeOptions opts);

  Hypothesis beam_search(const Sentence& src, std::uint64_t sentence_index = 0) const;
  /// Surface tokens (EOS dropped) with UNKs replaced by the recorded top
  /// recommendation when enabled.
  Sentence replace_unks(const Hypothesis& hyp, std::size_t* unk_left = nullptr) const;
  Translation translate(const Sentence& src, std::uint64_t sentence_index = 0) const;

  const DecodeOptions& options() const { return opts_; }

 private:
  bool advised() const { return smt_ != nullptr && model_->has_advisor(); }

  HybridModel* model_;
  const smt::SmtModel* smt_;
  DecodeOptions opts_;
  std::optional<VocabBridge> bridge_;
};

/// Teacher-forced log-probability of tokens (EOS included) under the same
/// fusion the translator uses.
double score_sequence(HybridModel& model, const smt::SmtModel* smt, const Sentence& src, std::span<const int> tokens,
                      const DecodeOptions& opts);

/// One JSON object describing the search for a sentence.
std::string trace_json(const Translation& tr, const HybridModel& model, const smt::SmtModel* smt);

}  // namespace hnmt
