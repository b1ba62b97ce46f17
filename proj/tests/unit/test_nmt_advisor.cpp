#include "hnmt/advisor.hpp"
#include "hnmt/hybrid.hpp"
#include "hnmt/nmt.hpp"
#include "hnmt/rng.hpp"
#include "hnmt/selftest.hpp"
#include "hnmt/training.hpp"

#include <doctest.h>

#include <cmath>

using namespace hnmt;
using ad::Graph;
using ad::Var;

namespace {

NmtConfig tiny_nmt(Index src_v, Index tgt_v) {
  NmtConfig c;
  c.src_vocab = src_v;
  c.tgt_vocab = tgt_v;
  c.emb = 4;
  c.hidden = 6;
  c.att = 5;
  c.readout = 5;
  c.init_scale = 0.5;
  return c;
}

struct Tiny {
  NmtConfig cfg = tiny_nmt(12, 9);
  AdvisorConfig acfg{5, 4, 5, 3};
  ParameterSet params;
  Tiny() {
    register_nmt_params(params, cfg);
    register_advisor_params(params, acfg, cfg);
    Rng rng(3);
    params.init_uniform(rng, 0.5);
  }
  Nmt nmt() { return Nmt(cfg, params); }
  Advisor advisor() { return Advisor(acfg, cfg, params); }
};

Matrix random_probs(Rng& rng, Index n, Index v) {
  Matrix p(n, v);
  for (Index i = 0; i < n; ++i) {
    double z = 0.0;
    for (Index j = 0; j < v; ++j) z += (p(i, j) = rng.uniform() + 1e-3);
    p.row(i) /= z;
  }
  return p;
}

}  // namespace

TEST_SUITE("nmt_advisor") {
  TEST_CASE("single source word gives one annotation of width 2d") {
    Tiny t;
    Graph g(false);
    const std::vector<int> ids = {5}, len = {1};
    auto enc = t.nmt().encode(g, ids, 1, 1, len);
    CHECK(g.rows(enc.annotations) == 1);
    CHECK(g.cols(enc.annotations) == 2 * t.cfg.hidden);
    CHECK(g.cols(enc.init_state) == t.cfg.hidden);
    auto [att, ctx] = t.nmt().attend(g, enc, enc.init_state, t.nmt().initial_context(g, 1));
    CHECK(g.value(att)(0, 0) == 1.0);
    CHECK((g.value(ctx) - g.value(enc.annotations)).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("zero weights give zero annotations, zero initial state and uniform attention") {
    Tiny t;
    for (auto& p : t.params) p->value.setZero();
    Graph g(false);
    const std::vector<int> ids = {3, 4, 5, 6}, len = {4};
    auto enc = t.nmt().encode(g, ids, 1, 4, len);
    CHECK(g.value(enc.annotations).cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.value(enc.init_state).cwiseAbs().maxCoeff() == 0.0);
    auto [att, ctx] = t.nmt().attend(g, enc, enc.init_state, t.nmt().initial_context(g, 1));
    for (int j = 0; j < 4; ++j) CHECK(g.value(att)(0, j) == doctest::Approx(0.25).epsilon(1e-15));
  }

  TEST_CASE("encoding is deterministic") {
    Tiny t;
    const std::vector<int> ids = {3, 7, 5}, len = {3};
    Graph g1(false), g2(false);
    auto a = t.nmt().encode(g1, ids, 1, 3, len);
    auto b = t.nmt().encode(g2, ids, 1, 3, len);
    CHECK(g1.value(a.annotations) == g2.value(b.annotations));
    CHECK(g1.value(a.init_state) == g2.value(b.init_state));
  }

  TEST_CASE("backward states of a reversed source equal forward states under swapped weights") {
    Tiny t;
    const std::vector<int> ids = {3, 7, 5, 9, 4}, len = {5};
    const std::vector<int> rev(ids.rbegin(), ids.rend());
    Graph g1(false);
    const Matrix a = g1.value(t.nmt().encode(g1, ids, 1, 5, len).annotations);
    Tiny s = t;
    for (const char* suffix : {".W_zr", ".b_zr", ".W_h", ".b_h"})
      std::swap(s.params.at(std::string("enc_fwd") + suffix).value, s.params.at(std::string("enc_bwd") + suffix).value);
    Graph g2(false);
    const Matrix b = g2.value(s.nmt().encode(g2, rev, 1, 5, len).annotations);
    const Index d = t.cfg.hidden;
    for (Index j = 0; j < 5; ++j) {
      CHECK((a.block(j, 0, 1, d) - b.block(4 - j, d, 1, d)).cwiseAbs().maxCoeff() <= 1e-14);
      CHECK((a.block(j, d, 1, d) - b.block(4 - j, 0, 1, d)).cwiseAbs().maxCoeff() <= 1e-14);
    }
  }

  TEST_CASE("attention ignores padding and context is the weighted annotation sum") {
    Tiny t;
    const std::vector<int> ids = {3, 4, 5, 6, 7, 8, 0, 0}, len = {4, 2};
    Graph g(false);
    auto nmt = t.nmt();
    auto enc = nmt.encode(g, ids, 2, 4, len);
    const std::vector<int> prev = {Vocabulary::kBos, Vocabulary::kBos};
    auto out = nmt.step(g, enc, enc.init_state, nmt.initial_context(g, 2), prev);
    const Matrix& a = g.value(out.attention);
    const Matrix& h = g.value(enc.annotations);
    const Matrix& c = g.value(out.context);
    for (Index i = 0; i < 2; ++i) {
      CHECK(std::abs(a.row(i).sum() - 1.0) <= 1e-9);
      for (Index j = len[static_cast<std::size_t>(i)]; j < 4; ++j) CHECK(a(i, j) == 0.0);
      for (Index k = 0; k < h.cols(); ++k) {
        double s = 0.0;
        for (Index j = 0; j < 4; ++j) s += a(i, j) * h(i * 4 + j, k);
        CHECK(c(i, k) == doctest::Approx(s).epsilon(1e-13));
      }
      CHECK(std::abs(g.value(out.probs).row(i).sum() - 1.0) <= 1e-9);
    }
  }

  TEST_CASE("padded batch encodes each sentence as if alone") {
    Tiny t;
    auto nmt = t.nmt();
    const std::vector<std::vector<int>> sents = {{3, 4, 5, 6}, {7, 8}, {9, 10, 11}};
    std::vector<int> ids, len;
    for (const auto& s : sents) {
      for (int j = 0; j < 4; ++j) ids.push_back(j < static_cast<int>(s.size()) ? s[static_cast<std::size_t>(j)] : 2);
      len.push_back(static_cast<int>(s.size()));
    }
    Graph g(false);
    auto enc = nmt.encode(g, ids, 3, 4, len);
    for (std::size_t i = 0; i < 3; ++i) {
      Graph gi(false);
      const std::vector<int> l = {len[i]};
      auto e = nmt.encode(gi, sents[i], 1, len[i], l);
      for (int j = 0; j < len[i]; ++j)
        CHECK((g.value(enc.annotations).row(static_cast<Index>(i) * 4 + j) - gi.value(e.annotations).row(j))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-14);
      CHECK((g.value(enc.init_state).row(static_cast<Index>(i)) - gi.value(e.init_state)).cwiseAbs().maxCoeff() <=
            1e-14);
    }
  }

  TEST_CASE("vocab bridge and step vocabulary") {
    const auto nmt_v = Vocabulary::from_tokens(std::vector<std::string>{"a", "b"});
    const auto smt_v = Vocabulary::from_tokens(std::vector<std::string>{"b", "c", "a"});
    const auto br = VocabBridge::build(nmt_v, smt_v);
    CHECK(br.smt_to_nmt[static_cast<std::size_t>(smt_v.encode("a"))] == nmt_v.encode("a"));
    CHECK(br.smt_to_nmt[static_cast<std::size_t>(smt_v.encode("c"))] == Vocabulary::kUnk);
    CHECK(br.nmt_to_smt[static_cast<std::size_t>(nmt_v.encode("b"))] == smt_v.encode("b"));
    std::vector<smt::Recommendation> recs(3);
    recs[0].word = smt_v.encode("c");
    recs[0].src_pos = 2;
    recs[0].score = -1;
    recs[1].word = smt_v.encode("a");
    recs[1].src_pos = 0;
    recs[1].score = -2;
    recs[2].word = smt_v.encode("c");
    recs[2].src_pos = 1;
    recs[2].score = -3;
    const auto sv = make_step_vocab(recs, br);
    REQUIRE(sv.size() == 2);
    CHECK(sv[0].nmt_id == Vocabulary::kUnk);
    CHECK(sv[0].src_pos == 2);
    CHECK(sv[1].nmt_id == nmt_v.encode("a"));
  }

  TEST_CASE("classifier distribution over candidates") {
    Tiny t;
    auto adv = t.advisor();
    Rng rng(4);
    const Index fdim = t.cfg.hidden + t.cfg.emb + 2 * t.cfg.hidden;
    Matrix f(2, fdim);
    for (Index i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-1, 1);
    std::vector<StepVocab> per_row(2);
    per_row[0].push_back({3, 3, 0, -1.0});
    for (int k = 0; k < 5; ++k) per_row[1].push_back({3 + k, 3 + k, k, -1.0});
    Graph g(false);
    auto p = adv.score_recs(g, g.constant(f), per_row);
    const Matrix& pv = g.value(p);
    REQUIRE(pv.rows() == 6);
    CHECK(pv(0, 0) == 1.0);
    CHECK(std::abs(pv.bottomRows(5).sum() - 1.0) <= 1e-9);
  }

  TEST_CASE("gate with zero weights is one half and always in (0,1)") {
    Tiny t;
    const Index fdim = t.cfg.hidden + t.cfg.emb + 2 * t.cfg.hidden;
    Rng rng(6);
    Matrix f(1, fdim);
    for (Index i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-1, 1);
    {
      Tiny z = t;
      for (auto& p : z.params)
        if (p->name.rfind("gate.", 0) == 0) p->value.setZero();
      Graph g(false);
      CHECK(g.scalar(z.advisor().gate(g, g.constant(f))) == 0.5);
    }
    for (int draw = 0; draw < 1000; ++draw) {
      Rng r(static_cast<std::uint64_t>(draw));
      t.params.init_uniform(r, 2.0);
      Graph g(false);
      const double a = g.scalar(t.advisor().gate(g, g.constant(f)));
      CHECK((a > 0.0 && a < 1.0));
    }
  }

  TEST_CASE("combine: hand interpolation and endpoints") {
    Graph g(false);
    Matrix pn(1, 2);
    pn << 0.5, 0.5;
    Matrix ps(1, 1);
    ps << 1.0;
    const std::vector<int> rows = {0}, cols = {0};
    auto out = combine(g, g.constant(pn), g.constant(ps), g.constant(Matrix::Constant(1, 1, 0.2)), rows, cols);
    CHECK(g.value(out)(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(g.value(out)(0, 1) == doctest::Approx(0.4).epsilon(1e-15));
    auto zero = combine(g, g.constant(pn), g.constant(ps), g.constant(Matrix::Zero(1, 1)), rows, cols);
    CHECK(g.value(zero) == pn);
    auto one = combine(g, g.constant(pn), g.constant(ps), g.constant(Matrix::Ones(1, 1)), rows, cols);
    CHECK(g.value(one)(0, 0) == 1.0);
    CHECK(g.value(one)(0, 1) == 0.0);
  }

  TEST_CASE("fused distribution normalizes, reduces to p_nmt at alpha 0, and grows in alpha") {
    Tiny t;
    auto adv = t.advisor();
    Rng rng(8);
    const Index fdim = t.cfg.hidden + t.cfg.emb + 2 * t.cfg.hidden;
    const Index V = t.cfg.tgt_vocab;
    for (int trial = 0; trial < 200; ++trial) {
      const Index n = 1 + static_cast<Index>(rng.below(4));
      Matrix f(n, fdim);
      for (Index i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-1, 1);
      const Matrix pn = random_probs(rng, n, V);
      std::vector<StepVocab> per_row(static_cast<std::size_t>(n));
      for (auto& row : per_row) {
        const auto k = rng.below(5);  // may be empty
        for (std::uint64_t c = 0; c < k; ++c) {
          const int id = static_cast<int>(rng.below(static_cast<std::uint64_t>(V)));  // collisions and UNK allowed
          row.push_back({id, id, 0, 0.0});
        }
      }
      Graph g(false);
      auto fused = adv.fuse(g, g.constant(f), g.constant(pn), per_row);
      for (Index i = 0; i < n; ++i) CHECK(std::abs(g.value(fused.probs).row(i).sum() - 1.0) <= 1e-9);
      for (Index i = 0; i < n; ++i)
        if (per_row[static_cast<std::size_t>(i)].empty()) {
          CHECK(g.value(fused.probs).row(i) == pn.row(i));
          CHECK(g.value(fused.alpha)(i, 0) == 0.0);
        }
      auto zero = adv.fuse(g, g.constant(f), g.constant(pn), per_row, 0.0);
      CHECK(g.value(zero.probs) == pn);
      // p(w) increases with alpha for candidates whose p_smt exceeds p_nmt.
      auto lo = adv.fuse(g, g.constant(f), g.constant(pn), per_row, 0.3);
      auto hi = adv.fuse(g, g.constant(f), g.constant(pn), per_row, 0.6);
      if (lo.cand_rows.empty()) continue;
      const Matrix& psmt = g.value(lo.p_smt);
      for (std::size_t k = 0; k < lo.cand_rows.size(); ++k) {
        const Index r = lo.cand_rows[k], c = lo.cand_cols[k];
        double mass = 0.0;
        for (std::size_t m = 0; m < lo.cand_rows.size(); ++m)
          if (lo.cand_rows[m] == r && lo.cand_cols[m] == c) mass += psmt(static_cast<Index>(m), 0);
        if (mass > pn(r, c)) CHECK(g.value(hi.probs)(r, c) > g.value(lo.probs)(r, c));
      }
    }
  }

  TEST_CASE("shared target embeddings receive gradient from both NMT and classifier paths") {
    auto fx = make_gradient_fixture(2);
    HybridLossOptions h{&fx.smt, &fx.bridge, fx.n_rec, std::nullopt};
    auto grad_of = [&](const HybridLossOptions* opts) {
      fx.model.params.zero_grad();
      Graph g;
      g.backward(nll_loss(g, fx.model, fx.batch, fx.corpus, opts));
      return Matrix(fx.model.params.at("tgt_emb").grad);
    };
    const Matrix nmt_only = grad_of(nullptr);
    const Matrix hybrid = grad_of(&h);
    CHECK(nmt_only.cwiseAbs().maxCoeff() > 0.0);
    CHECK((hybrid - nmt_only).cwiseAbs().maxCoeff() > 1e-8);
    // Gate parameters are connected to the hybrid loss.
    CHECK(fx.model.params.at("gate.w3").grad.cwiseAbs().maxCoeff() > 0.0);
    CHECK(fx.model.params.at("cls.W1_cand").grad.cwiseAbs().maxCoeff() > 0.0);
  }
}
