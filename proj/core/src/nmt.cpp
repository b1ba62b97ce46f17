#include "hnmt/nmt.hpp"

#include <cstdio>
#include <stdexcept>

namespace hnmt {

using ad::Graph;
using ad::Var;

void NmtConfig::validate() const {
  if (src_vocab < 4 || tgt_vocab < 4) throw std::invalid_argument("nmt: vocabularies need at least 4 entries");
  if (emb < 1 || hidden < 1 || att < 1 || readout < 1) throw std::invalid_argument("nmt: dimensions must be positive");
  if (!(init_scale > 0.0)) throw std::invalid_argument("nmt: init_scale must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("nmt: dropout must be in [0, 1)");
}

std::map<std::string, std::string> NmtConfig::to_meta() const {
  auto s = [](auto v) { return std::to_string(v); };
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", init_scale);
  std::string scale = buf;
  std::snprintf(buf, sizeof buf, "%.17g", dropout);
  return {{"nmt.src_vocab", s(src_vocab)}, {"nmt.tgt_vocab", s(tgt_vocab)}, {"nmt.emb", s(emb)},
          {"nmt.hidden", s(hidden)},       {"nmt.att", s(att)},             {"nmt.readout", s(readout)},
          {"nmt.init_scale", scale},       {"nmt.dropout", buf}};
}

NmtConfig NmtConfig::from_meta(const std::map<std::string, std::string>& meta) {
  auto get = [&meta](const char* k) -> const std::string& {
    auto it = meta.find(k);
    if (it == meta.end()) throw DataError(std::string("checkpoint lacks ") + k);
    return it->second;
  };
  NmtConfig c;
  c.src_vocab = std::stol(get("nmt.src_vocab"));
  c.tgt_vocab = std::stol(get("nmt.tgt_vocab"));
  c.emb = std::stol(get("nmt.emb"));
  c.hidden = std::stol(get("nmt.hidden"));
  c.att = std::stol(get("nmt.att"));
  c.readout = std::stol(get("nmt.readout"));
  c.init_scale = std::strtod(get("nmt.init_scale").c_str(), nullptr);
  c.dropout = std::strtod(get("nmt.dropout").c_str(), nullptr);
  c.validate();
  return c;
}

void register_nmt_params(ParameterSet& ps, const NmtConfig& c) {
  c.validate();
  const Index e = c.emb, d = c.hidden;
  ps.add("src_emb", c.src_vocab, e);
  ps.add("tgt_emb", c.tgt_vocab, e);
  for (const char* dir : {"enc_fwd", "enc_bwd"}) {
    const std::string p = dir;
    ps.add(p + ".W_zr", e + d, 2 * d);
    ps.add(p + ".b_zr", 1, 2 * d);
    ps.add(p + ".W_h", e + d, d);
    ps.add(p + ".b_h", 1, d);
  }
  ps.add("init.W", d, d);
  ps.add("att.W_q", d + 2 * d, c.att);
  ps.add("att.b", 1, c.att);
  ps.add("att.U", 2 * d, c.att);
  ps.add("att.v", c.att, 1);
  ps.add("dec.W_zr", e + 2 * d + d, 2 * d);
  ps.add("dec.b_zr", 1, 2 * d);
  ps.add("dec.W_h", e + 2 * d + d, d);
  ps.add("dec.b_h", 1, d);
  ps.add("out.W_r", d + e + 2 * d, c.readout);
  ps.add("out.b_r", 1, c.readout);
  ps.add("out.W_o", c.readout, c.tgt_vocab);
}

Nmt::Nmt(const NmtConfig& cfg, ParameterSet& params) : cfg_(cfg), params_(&params) {
  cfg_.validate();
  const Parameter& emb = p("tgt_emb");
  if (emb.value.rows() != cfg_.tgt_vocab || emb.value.cols() != cfg_.emb) {
    throw ShapeError("nmt: tgt_emb is " + shape_str(emb.value) + ", config disagrees");
  }
}

// x is n x in, h is n x d. Standard update/reset gate GRU:
//   z, r = sigmoid([x ; h] W_zr + b_zr)
//   h~   = tanh([x ; r*h] W_h + b_h)
//   h'   = h + z * (h~ - h)
Var Nmt::gru(Graph& g, const char* prefix, Var x, Var h) const {
  const std::string pre = prefix;
  const Index d = cfg_.hidden;
  Var zr = g.sigmoid(g.affine(g.concat_cols({x, h}), g.param(p(pre + ".W_zr")), g.param(p(pre + ".b_zr"))));
  Var z = g.slice_cols(zr, 0, d);
  Var r = g.slice_cols(zr, d, d);
  Var cand = g.tanh(g.affine(g.concat_cols({x, g.mul(r, h)}), g.param(p(pre + ".W_h")), g.param(p(pre + ".b_h"))));
  return g.add(h, g.mul(z, g.sub(cand, h)));
}

Encoded Nmt::encode(Graph& g, std::span<const int> ids, Index n, Index T, std::span<const int> lengths) const {
  if (n < 1 || T < 1) throw std::invalid_argument("encode: empty source");
  if (static_cast<Index>(ids.size()) != n * T || static_cast<Index>(lengths.size()) != n) {
    throw ShapeError("encode: ids/lengths do not match n x T");
  }
  for (int id : ids) {
    if (id < 0 || id >= cfg_.src_vocab) throw std::out_of_range("encode: source id " + std::to_string(id) + " out of range");
  }
  for (int len : lengths) {
    if (len < 1 || len > T) throw std::invalid_argument("encode: sentence length outside [1, T]");
  }

  Encoded enc;
  enc.n = n;
  enc.T = T;
  enc.lengths.assign(lengths.begin(), lengths.end());
  enc.mask = Matrix::Zero(n, T);
  enc.owner.resize(static_cast<std::size_t>(n * T));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < T; ++j) {
      enc.mask(i, j) = j < lengths[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      enc.owner[static_cast<std::size_t>(i * T + j)] = static_cast<int>(i);
    }
  }

  Var src_emb = g.param(p("src_emb"));
  std::vector<Var> x(static_cast<std::size_t>(T));
  std::vector<int> col(static_cast<std::size_t>(n));
  for (Index t = 0; t < T; ++t) {
    for (Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = ids[static_cast<std::size_t>(i * T + t)];
    x[static_cast<std::size_t>(t)] = g.row_select(src_emb, col);
  }

  // Positions past a sentence's end leave the running state untouched, which
  // keeps the backward sweep at exactly zero until the last real word.
  auto sweep = [&](const char* prefix, bool reverse) {
    std::vector<Var> states(static_cast<std::size_t>(T));
    Var h = g.constant(Matrix::Zero(n, cfg_.hidden));
    std::vector<char> valid(static_cast<std::size_t>(n));
    for (Index k = 0; k < T; ++k) {
      const Index t = reverse ? T - 1 - k : k;
      Var next = gru(g, prefix, x[static_cast<std::size_t>(t)], h);
      bool all = true;
      for (Index i = 0; i < n; ++i) {
        valid[static_cast<std::size_t>(i)] = t < lengths[static_cast<std::size_t>(i)];
        all = all && valid[static_cast<std::size_t>(i)];
      }
      h = all ? next : g.where_rows(valid, next, h);
      states[static_cast<std::size_t>(t)] = h;
    }
    return states;
  };
  auto fwd = sweep("enc_fwd", false);
  auto bwd = sweep("enc_bwd", true);

  std::vector<Var> ann(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) ann[static_cast<std::size_t>(t)] = g.concat_cols({fwd[static_cast<std::size_t>(t)], bwd[static_cast<std::size_t>(t)]});
  enc.annotations = g.interleave_rows(ann);
  enc.keys = g.matmul(enc.annotations, g.param(p("att.U")));
  enc.init_state = g.tanh(g.matmul(bwd[0], g.param(p("init.W"))));
  return enc;
}

Encoded Nmt::select(Graph& g, const Encoded& enc, std::span<const int> rows) const {
  if (rows.empty()) throw std::invalid_argument("select: no rows");
  Encoded out;
  out.n = static_cast<Index>(rows.size());
  out.T = enc.T;
  out.mask.resize(out.n, enc.T);
  std::vector<int> idx;
  idx.reserve(rows.size() * static_cast<std::size_t>(enc.T));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const int r = rows[k];
    if (r < 0 || r >= enc.n) throw std::out_of_range("select: row out of range");
    out.mask.row(static_cast<Index>(k)) = enc.mask.row(r);
    out.lengths.push_back(enc.lengths[static_cast<std::size_t>(r)]);
    for (Index j = 0; j < enc.T; ++j) {
      idx.push_back(static_cast<int>(r * enc.T + j));
      out.owner.push_back(static_cast<int>(k));
    }
  }
  out.annotations = g.row_select(enc.annotations, idx);
  out.keys = g.row_select(enc.keys, idx);
  out.init_state = g.row_select(enc.init_state, rows);
  return out;
}

Var Nmt::initial_context(Graph& g, Index n) const { return g.constant(Matrix::Zero(n, 2 * cfg_.hidden)); }

// Additive attention with the previous context fed back into the energy:
//   e_tj = v' tanh([s_{t-1} ; c_{t-1}] W_q + b + h_j U)
std::pair<Var, Var> Nmt::attend(Graph& g, const Encoded& enc, Var s_prev, Var c_prev) const {
  Var q = g.affine(g.concat_cols({s_prev, c_prev}), g.param(p("att.W_q")), g.param(p("att.b")));
  Var energy = g.matmul(g.tanh(g.add(g.row_select(q, enc.owner), enc.keys)), g.param(p("att.v")));
  Var alpha = g.masked_softmax_rows(g.reshape(energy, enc.n, enc.T), enc.mask);
  return {alpha, g.weighted_rows(alpha, enc.annotations)};
}

StepOut Nmt::step(Graph& g, const Encoded& enc, Var s_prev, Var c_prev, std::span<const int> y_prev,
                  Rng* dropout_rng) const {
  if (static_cast<Index>(y_prev.size()) != enc.n) throw ShapeError("step: y_prev has wrong length");
  for (int y : y_prev) {
    if (y < 0 || y >= cfg_.tgt_vocab) throw std::out_of_range("step: target id out of range");
  }
  StepOut out;
  auto [alpha, ctx] = attend(g, enc, s_prev, c_prev);
  Var emb = g.row_select(g.param(p("tgt_emb")), y_prev);
  out.attention = alpha;
  out.context = ctx;
  out.state = gru(g, "dec", g.concat_cols({emb, ctx}), s_prev);
  out.features = g.concat_cols({out.state, emb, ctx});
  Var hidden = g.tanh(g.affine(out.features, g.param(p("out.W_r")), g.param(p("out.b_r"))));
  if (cfg_.dropout > 0.0 && dropout_rng && g.recording()) hidden = g.dropout(hidden, cfg_.dropout, *dropout_rng);
  out.probs = g.softmax_rows(g.matmul(hidden, g.param(p("out.W_o"))));
  return out;
}

}  // namespace hnmt
