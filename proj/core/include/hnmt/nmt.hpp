#pragma once

#include "hnmt/graph.hpp"
#include "hnmt/tensor.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace hnmt {

struct NmtConfig {
  Index src_vocab = 0;
  Index tgt_vocab = 0;
  Index emb = 32;
  Index hidden = 64;
  Index att = 64;
  Index readout = 64;
  double init_scale = 0.1;
  double dropout = 0.0;  // readout layer, training only

  void validate() const;
  std::map<std::string, std::string> to_meta() const;
  static NmtConfig from_meta(const std::map<std::string, std::string>& meta);
  bool operator==(const NmtConfig&) const = default;
};

/// Registers every encoder/decoder tensor under its canonical name.
void register_nmt_params(ParameterSet& params, const NmtConfig& cfg);

/// Encoder states for n sentences padded to T positions.
struct Encoded {
  Index n = 0;
  Index T = 0;
  ad::Var annotations;  // (n*T) x 2d, row i*T+j = [fwd_j ; bwd_j] of sentence i
  ad::Var keys;         // (n*T) x att, annotations projected for attention
  ad::Var init_state;   // n x d
  Matrix mask;          // n x T
  std::vector<int> lengths;
  std::vector<int> owner;  // owner[i*T+j] = i
};

struct StepOut {
  ad::Var state;      // n x d
  ad::Var context;    // n x 2d
  ad::Var attention;  // n x T
  ad::Var features;   // n x (d + e + 2d): [s_t ; emb(y_prev) ; c_t]
  ad::Var probs;      // n x |V_tgt|
};

/// Attention encoder-decoder operating on a ParameterSet that holds the
/// tensors of register_nmt_params. The set must outlive the view.
class Nmt {
 public:
  Nmt(const NmtConfig& cfg, ParameterSet& params);

  const NmtConfig& config() const { return cfg_; }

  /// ids is n x T row-major; positions at or beyond lengths[i] are padding.
  Encoded encode(ad::Graph& g, std::span<const int> ids, Index n, Index T, std::span<const int> lengths) const;
  /// Picks sentence rows[k] of enc as row k of the result.
  Encoded select(ad::Graph& g, const Encoded& enc, std::span<const int> rows) const;

  /// Attention weights and context from the previous state and context.
  std::pair<ad::Var, ad::Var> attend(ad::Graph& g, const Encoded& enc, ad::Var s_prev, ad::Var c_prev) const;

  /// One decoder step. rng is only consulted when dropout is active.
  StepOut step(ad::Graph& g, const Encoded& enc, ad::Var s_prev, ad::Var c_prev, std::span<const int> y_prev,
               Rng* dropout_rng = nullptr) const;

  /// Zero context of shape n x 2d used before the first step.
  ad::Var initial_context(ad::Graph& g, Index n) const;

 private:
  ad::Var gru(ad::Graph& g, const char* prefix, ad::Var x, ad::Var h) const;
  Parameter& p(const std::string& name) const { return params_->at(name); }

  NmtConfig cfg_;
  ParameterSet* params_;
};

}  // namespace hnmt
