#pragma once

#include "hnmt/graph.hpp"
#include "hnmt/nmt.hpp"
#include "hnmt/smt_model.hpp"

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace hnmt {

struct AdvisorConfig {
  Index cls_h1 = 32;
  Index cls_h2 = 16;
  Index gate_h1 = 32;
  Index gate_h2 = 16;

  void validate() const;
  std::map<std::string, std::string> to_meta() const;
  static AdvisorConfig from_meta(const std::map<std::string, std::string>& meta);
  bool operator==(const AdvisorConfig&) const = default;
};

/// Classifier and gate tensors. Candidate embeddings reuse "tgt_emb".
void register_advisor_params(ParameterSet& params, const AdvisorConfig& cfg, const NmtConfig& nmt);

/// Id maps between the NMT target vocabulary and the SMT target vocabulary.
struct VocabBridge {
  std::vector<int> smt_to_nmt;  // OOV words map to UNK
  std::vector<int> nmt_to_smt;

  static VocabBridge build(const Vocabulary& nmt_tgt, const Vocabulary& smt_tgt);
};

/// One distinct recommended word of a decoding step.
struct StepCandidate {
  int smt_word = 0;
  int nmt_id = 0;  // UNK for words outside the NMT vocabulary
  int src_pos = 0;
  double smt_score = 0.0;
};
using StepVocab = std::vector<StepCandidate>;

/// Keeps the first (best) occurrence of every recommended word.
StepVocab make_step_vocab(std::span<const smt::Recommendation> recs, const VocabBridge& bridge);

struct FusionOut {
  ad::Var probs;  // n x |V_nmt|
  ad::Var gate;   // n x 1, sigmoid output of the gate network
  ad::Var alpha;  // n x 1, weight actually applied (0 on rows without candidates)
  ad::Var p_smt;  // k x 1 over all candidates; invalid when k == 0
  std::vector<int> cand_rows;
  std::vector<int> cand_cols;
};

/// p = (1 - alpha) p_nmt + alpha p_smt, where candidate mass lands on the
/// candidate's NMT id. alpha is n x 1, p_smt is k x 1 with positions (rows, cols).
ad::Var combine(ad::Graph& g, ad::Var p_nmt, ad::Var p_smt, ad::Var alpha, std::span<const int> rows,
                std::span<const int> cols);

class Advisor {
 public:
  Advisor(const AdvisorConfig& cfg, const NmtConfig& nmt, ParameterSet& params);

  /// Softmax of the classifier scores within each row's candidates.
  /// features is n x (d + e + 2d); returns k x 1 ordered row by row.
  ad::Var score_recs(ad::Graph& g, ad::Var features, std::span<const StepVocab> per_row) const;
  /// n x 1 gate values in (0, 1).
  ad::Var gate(ad::Graph& g, ad::Var features) const;

  /// Full fusion for a step. fixed_gate replaces the learned gate; rows
  /// without candidates always fall back to p_nmt.
  FusionOut fuse(ad::Graph& g, ad::Var features, ad::Var p_nmt, std::span<const StepVocab> per_row,
                 std::optional<double> fixed_gate = std::nullopt) const;

 private:
  Parameter& p(const std::string& name) const { return params_->at(name); }

  AdvisorConfig cfg_;
  NmtConfig nmt_;
  ParameterSet* params_;
};

}  // namespace hnmt
