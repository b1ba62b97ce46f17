#include "hnmt/advisor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace hnmt {

using ad::Graph;
using ad::Var;

void AdvisorConfig::validate() const {
  if (cls_h1 < 1 || cls_h2 < 1 || gate_h1 < 1 || gate_h2 < 1) {
    throw std::invalid_argument("advisor: hidden sizes must be positive");
  }
}

std::map<std::string, std::string> AdvisorConfig::to_meta() const {
  return {{"advisor.cls_h1", std::to_string(cls_h1)},
          {"advisor.cls_h2", std::to_string(cls_h2)},
          {"advisor.gate_h1", std::to_string(gate_h1)},
          {"advisor.gate_h2", std::to_string(gate_h2)}};
}

AdvisorConfig AdvisorConfig::from_meta(const std::map<std::string, std::string>& meta) {
  auto get = [&meta](const char* k) {
    auto it = meta.find(k);
    if (it == meta.end()) throw DataError(std::string("checkpoint lacks ") + k);
    return std::stol(it->second);
  };
  AdvisorConfig c;
  c.cls_h1 = get("advisor.cls_h1");
  c.cls_h2 = get("advisor.cls_h2");
  c.gate_h1 = get("advisor.gate_h1");
  c.gate_h2 = get("advisor.gate_h2");
  c.validate();
  return c;
}

void register_advisor_params(ParameterSet& ps, const AdvisorConfig& c, const NmtConfig& nmt) {
  c.validate();
  const Index in = nmt.hidden + nmt.emb + 2 * nmt.hidden;
  ps.add("cls.W1_ctx", in, c.cls_h1);
  ps.add("cls.W1_cand", nmt.emb, c.cls_h1);
  ps.add("cls.b1", 1, c.cls_h1);
  ps.add("cls.W2", c.cls_h1, c.cls_h2);
  ps.add("cls.b2", 1, c.cls_h2);
  ps.add("cls.w3", c.cls_h2, 1);
  ps.add("gate.W1", in, c.gate_h1);
  ps.add("gate.b1", 1, c.gate_h1);
  ps.add("gate.W2", c.gate_h1, c.gate_h2);
  ps.add("gate.b2", 1, c.gate_h2);
  ps.add("gate.w3", c.gate_h2, 1);
  ps.add("gate.b3", 1, 1);
}

VocabBridge VocabBridge::build(const Vocabulary& nmt_tgt, const Vocabulary& smt_tgt) {
  VocabBridge b;
  b.smt_to_nmt.resize(smt_tgt.size());
  for (std::size_t i = 0; i < smt_tgt.size(); ++i) b.smt_to_nmt[i] = nmt_tgt.encode(smt_tgt.decode(static_cast<int>(i)));
  b.nmt_to_smt.resize(nmt_tgt.size());
  for (std::size_t i = 0; i < nmt_tgt.size(); ++i) b.nmt_to_smt[i] = smt_tgt.encode(nmt_tgt.decode(static_cast<int>(i)));
  return b;
}

StepVocab make_step_vocab(std::span<const smt::Recommendation> recs, const VocabBridge& bridge) {
  StepVocab out;
  std::unordered_set<int> seen;
  for (const auto& r : recs) {
    if (!seen.insert(r.word).second) continue;
    out.push_back({r.word, bridge.smt_to_nmt.at(static_cast<std::size_t>(r.word)), r.src_pos, r.score});
  }
  return out;
}

Var combine(Graph& g, Var p_nmt, Var p_smt, Var alpha, std::span<const int> rows, std::span<const int> cols) {
  Var base = g.scale_rows(p_nmt, g.scale_shift(alpha, -1.0, 1.0));
  if (rows.empty()) return base;
  Var mass = g.mul(g.row_select(alpha, rows), p_smt);
  return g.scatter_add(base, mass, rows, cols);
}

Advisor::Advisor(const AdvisorConfig& cfg, const NmtConfig& nmt, ParameterSet& params)
    : cfg_(cfg), nmt_(nmt), params_(&params) {
  cfg_.validate();
  if (!params_->find("cls.W1_ctx") || !params_->find("gate.W1")) throw DataError("advisor: parameters not registered");
}

// score(w) = w3' tanh(W2' tanh(W1_ctx' [s ; e_prev ; c] + W1_cand' emb(w) + b1) + b2)
Var Advisor::score_recs(Graph& g, Var features, std::span<const StepVocab> per_row) const {
  if (static_cast<Index>(per_row.size()) != g.rows(features)) throw ShapeError("score_recs: one StepVocab per row");
  std::vector<int> rows, ids, sizes;
  for (std::size_t i = 0; i < per_row.size(); ++i) {
    if (per_row[i].empty()) continue;
    sizes.push_back(static_cast<int>(per_row[i].size()));
    for (const auto& c : per_row[i]) {
      rows.push_back(static_cast<int>(i));
      ids.push_back(c.nmt_id);
    }
  }
  if (rows.empty()) throw std::invalid_argument("score_recs: no candidates");
  Var ctx = g.affine(features, g.param(p("cls.W1_ctx")), g.param(p("cls.b1")));
  Var cand = g.matmul(g.row_select(g.param(p("tgt_emb")), ids), g.param(p("cls.W1_cand")));
  Var h1 = g.tanh(g.add(g.row_select(ctx, rows), cand));
  Var h2 = g.tanh(g.affine(h1, g.param(p("cls.W2")), g.param(p("cls.b2"))));
  // No output bias: a shared offset cancels in the softmax over candidates.
  Var scores = g.matmul(h2, g.param(p("cls.w3")));
  return g.segment_softmax(scores, sizes);
}

Var Advisor::gate(Graph& g, Var features) const {
  Var h1 = g.tanh(g.affine(features, g.param(p("gate.W1")), g.param(p("gate.b1"))));
  Var h2 = g.tanh(g.affine(h1, g.param(p("gate.W2")), g.param(p("gate.b2"))));
  return g.sigmoid(g.affine(h2, g.param(p("gate.w3")), g.param(p("gate.b3"))));
}

FusionOut Advisor::fuse(Graph& g, Var features, Var p_nmt, std::span<const StepVocab> per_row,
                        std::optional<double> fixed_gate) const {
  const Index n = g.rows(features);
  if (static_cast<Index>(per_row.size()) != n) throw ShapeError("fuse: one StepVocab per row");
  if (fixed_gate && (*fixed_gate < 0.0 || *fixed_gate > 1.0)) throw std::invalid_argument("fuse: fixed gate outside [0, 1]");
  FusionOut out;
  Matrix has(n, 1);
  for (Index i = 0; i < n; ++i) {
    const auto& sv = per_row[static_cast<std::size_t>(i)];
    has(i, 0) = sv.empty() ? 0.0 : 1.0;
    for (const auto& c : sv) {
      out.cand_rows.push_back(static_cast<int>(i));
      out.cand_cols.push_back(c.nmt_id);
    }
  }
  if (fixed_gate) {
    out.gate = g.constant(Matrix::Constant(n, 1, *fixed_gate));
    out.alpha = g.constant(has * *fixed_gate);
  } else {
    out.gate = gate(g, features);
    out.alpha = g.mul(out.gate, g.constant(has));
  }
  if (out.cand_rows.empty()) {
    out.probs = p_nmt;
    return out;
  }
  out.p_smt = score_recs(g, features, per_row);
  out.probs = combine(g, p_nmt, out.p_smt, out.alpha, out.cand_rows, out.cand_cols);
  return out;
}

}  // namespace hnmt
