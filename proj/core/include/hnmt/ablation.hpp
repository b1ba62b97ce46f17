#pragma once

#include "hnmt/decoder.hpp"
#include "hnmt/eval.hpp"

#include <string>
#include <vector>

namespace hnmt {

/// Translates every sentence; the sentence index seeds pseudo recommendations.
std::vector<Translation> translate_all(const Translator& tr, std::span<const Sentence> sources);
std::vector<Sentence> outputs_of(std::span<const Translation> translations);

struct AblationRow {
  std::string name;
  BleuReport bleu;
  double token_accuracy = 0.0;
  std::size_t unk_left = 0;
  std::vector<Sentence> outputs;
};

/// The six configurations, in order: baseline NMT, +SMT rec, alpha=0,
/// alpha=0.20, pseudo recs, +UNK replace. Only the last replaces UNKs.
std::vector<AblationRow> run_ablation(HybridModel& nmt, HybridModel& hybrid, const smt::SmtModel& smt,
                                      const ParallelCorpus& test, const DecodeOptions& base);

std::string ablation_table(std::span<const AblationRow> rows);
std::string ablation_json(std::span<const AblationRow> rows);

}  // namespace hnmt
