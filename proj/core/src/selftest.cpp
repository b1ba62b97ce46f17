#include "hnmt/selftest.hpp"

#include "hnmt/rng.hpp"
#include "hnmt/synthetic.hpp"
#include "hnmt/training.hpp"

#include <functional>
#include <map>
#include <set>

namespace hnmt {

using ad::Graph;
using ad::Var;

GradientFixture make_gradient_fixture(std::uint64_t seed) {
  SyntheticOptions so;
  so.task = SyntheticTask::kLexiconRare;
  so.num_types = 12;
  so.rare_fraction = 0.25;
  so.rare_rate = 0.5;
  so.min_len = 3;
  so.max_len = 5;
  SyntheticLanguage lang(so, seed);

  GradientFixture f;
  f.corpus = lang.sample(40, seed);

  NmtConfig nc;
  nc.emb = 4;
  nc.hidden = 6;
  nc.att = 5;
  nc.readout = 5;
  nc.init_scale = 0.5;
  f.model = HybridModel::create(Vocabulary::build(f.corpus.source, 0),
                                Vocabulary::build(f.corpus.target, lang.common_vocab_cap()), nc, seed);
  AdvisorConfig ac;
  ac.cls_h1 = 5;
  ac.cls_h2 = 4;
  ac.gate_h1 = 5;
  ac.gate_h2 = 3;
  f.model.add_advisor(ac);

  smt::SmtOptions opts;
  opts.ibm_iters = 5;
  opts.n_tm = 3;
  f.smt = smt::train_smt(f.corpus, f.model.tgt_vocab, smt::StopList::english_default(), opts);
  f.bridge = VocabBridge::build(f.model.tgt_vocab, f.smt.target_vocab);

  // Two pairs of different length whose source words are distinct, so the
  // covered position of every gold word is unambiguous.
  std::vector<std::size_t> pick;
  for (std::size_t i = 0; i < f.corpus.size() && pick.size() < 2; ++i) {
    const auto& s = f.corpus.source[i];
    if (std::set<std::string>(s.begin(), s.end()).size() != s.size()) continue;
    if (!pick.empty() && f.corpus.source[pick[0]].size() == s.size()) continue;
    pick.push_back(i);
  }
  if (pick.size() < 2) throw std::logic_error("gradient fixture: no suitable sentence pair");
  f.batch = make_batch(f.corpus, f.model.src_vocab, f.model.tgt_vocab, pick);
  return f;
}

ad::GradCheckReport check_hybrid_gradients(std::uint64_t seed, double h, double tol, ad::Stencil stencil) {
  GradientFixture f = make_gradient_fixture(seed);
  HybridLossOptions opts{&f.smt, &f.bridge, f.n_rec, std::nullopt};
  auto loss = [&](Graph& g) { return nll_loss(g, f.model, f.batch, f.corpus, &opts); };
  return ad::finite_diff_check(loss, f.model.params, h, tol, stencil);
}

namespace {

Matrix randn(Rng& rng, Index r, Index c) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

Index dim(Rng& rng) { return 1 + static_cast<Index>(rng.below(4)); }

std::vector<int> rand_ints(Rng& rng, std::size_t n, std::uint64_t bound) {
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(rng.below(bound));
  return v;
}

// Builds parameters for one op and a loss sum(op(...) * R).
struct OpCase {
  ParameterSet params;
  std::function<Var(Graph&)> forward;
};

Var weighted_sum(Graph& g, Var out, const Matrix& r) { return g.sum(g.mul(out, g.constant(r))); }

OpCase make_case(const std::string& op, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0x0b5);
  OpCase c;
  auto add = [&](const char* name, Index r, Index k, double lo = 0.0, double hi = 0.0) -> Parameter& {
    Parameter& p = c.params.add(name, r, k);
    p.value = lo < hi ? Matrix::NullaryExpr(r, k, [&] { return rng.uniform(lo, hi); }) : randn(rng, r, k);
    return p;
  };
  const Index n = dim(rng), k = dim(rng), a = dim(rng);
  ParameterSet& ps = c.params;
  auto P = [&ps](const char* name) -> Parameter& { return ps.at(name); };

  auto unary = [&](std::function<Var(Graph&, Var)> f, double lo = 0.0, double hi = 0.0) {
    add("x", n, k, lo, hi);
    Matrix r = randn(rng, n, k);
    c.forward = [f, r, P](Graph& g) { return weighted_sum(g, f(g, g.param(P("x"))), r); };
  };
  auto binary = [&](std::function<Var(Graph&, Var, Var)> f) {
    add("a", n, k);
    add("b", n, k);
    Matrix r = randn(rng, n, k);
    c.forward = [f, r, P](Graph& g) { return weighted_sum(g, f(g, g.param(P("a")), g.param(P("b"))), r); };
  };

  if (op == "affine") {
    add("x", n, a);
    add("W", a, k);
    add("b", 1, k);
    Matrix r = randn(rng, n, k);
    c.forward = [r, P](Graph& g) {
      return weighted_sum(g, g.affine(g.param(P("x")), g.param(P("W")), g.param(P("b"))), r);
    };
  } else if (op == "matmul") {
    add("x", n, a);
    add("W", a, k);
    Matrix r = randn(rng, n, k);
    c.forward = [r, P](Graph& g) { return weighted_sum(g, g.matmul(g.param(P("x")), g.param(P("W"))), r); };
  } else if (op == "add") {
    binary([](Graph& g, Var x, Var y) { return g.add(x, y); });
  } else if (op == "sub") {
    binary([](Graph& g, Var x, Var y) { return g.sub(x, y); });
  } else if (op == "mul") {
    binary([](Graph& g, Var x, Var y) { return g.mul(x, y); });
  } else if (op == "sigmoid") {
    unary([](Graph& g, Var x) { return g.sigmoid(x); });
  } else if (op == "tanh") {
    unary([](Graph& g, Var x) { return g.tanh(x); });
  } else if (op == "log") {
    unary([](Graph& g, Var x) { return g.log(x); }, 0.5, 2.0);
  } else if (op == "scale_shift") {
    unary([](Graph& g, Var x) { return g.scale_shift(x, 1.7, -0.3); });
  } else if (op == "softmax_rows") {
    unary([](Graph& g, Var x) { return g.softmax_rows(x); });
  } else if (op == "masked_softmax_rows") {
    Matrix mask = Matrix::Zero(n, k);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < k; ++j) mask(i, j) = rng.uniform() < 0.6 ? 1.0 : 0.0;
      mask(i, static_cast<Index>(rng.below(static_cast<std::uint64_t>(k)))) = 1.0;
    }
    unary([mask](Graph& g, Var x) { return g.masked_softmax_rows(x, mask); });
  } else if (op == "segment_softmax") {
    std::vector<int> sizes;
    Index total = 0;
    for (Index s = 0; s < n; ++s) {
      sizes.push_back(1 + static_cast<int>(rng.below(3)));
      total += sizes.back();
    }
    add("x", total, 1);
    Matrix r = randn(rng, total, 1);
    c.forward = [sizes, r, P](Graph& g) { return weighted_sum(g, g.segment_softmax(g.param(P("x")), sizes), r); };
  } else if (op == "concat_cols") {
    add("a", n, k);
    add("b", n, a);
    Matrix r = randn(rng, n, k + a);
    c.forward = [r, P](Graph& g) { return weighted_sum(g, g.concat_cols({g.param(P("a")), g.param(P("b"))}), r); };
  } else if (op == "slice_cols") {
    add("x", n, k + a);
    Matrix r = randn(rng, n, a);
    c.forward = [r, k, a, P](Graph& g) { return weighted_sum(g, g.slice_cols(g.param(P("x")), k, a), r); };
  } else if (op == "row_select") {
    add("x", n, k);
    auto rows = rand_ints(rng, static_cast<std::size_t>(a + 2), static_cast<std::uint64_t>(n));
    Matrix r = randn(rng, a + 2, k);
    c.forward = [rows, r, P](Graph& g) { return weighted_sum(g, g.row_select(g.param(P("x")), rows), r); };
  } else if (op == "interleave_rows") {
    add("s0", n, k);
    add("s1", n, k);
    add("s2", n, k);
    Matrix r = randn(rng, 3 * n, k);
    c.forward = [r, P](Graph& g) {
      std::vector<Var> steps{g.param(P("s0")), g.param(P("s1")), g.param(P("s2"))};
      return weighted_sum(g, g.interleave_rows(steps), r);
    };
  } else if (op == "reshape") {
    add("x", n, k);
    Matrix r = randn(rng, 1, n * k);
    c.forward = [r, n, k, P](Graph& g) { return weighted_sum(g, g.reshape(g.param(P("x")), 1, n * k), r); };
  } else if (op == "weighted_rows") {
    add("w", n, a);
    add("s", n * a, k);
    Matrix r = randn(rng, n, k);
    c.forward = [r, P](Graph& g) { return weighted_sum(g, g.weighted_rows(g.param(P("w")), g.param(P("s"))), r); };
  } else if (op == "scale_rows") {
    add("x", n, k);
    add("c", n, 1);
    Matrix r = randn(rng, n, k);
    c.forward = [r, P](Graph& g) { return weighted_sum(g, g.scale_rows(g.param(P("x")), g.param(P("c"))), r); };
  } else if (op == "where_rows") {
    std::vector<char> take(static_cast<std::size_t>(n));
    for (auto& t : take) t = static_cast<char>(rng.below(2));
    binary([take](Graph& g, Var x, Var y) { return g.where_rows(take, x, y); });
  } else if (op == "scatter_add") {
    add("base", n, k);
    const auto m = static_cast<std::size_t>(a + 2);
    add("v", static_cast<Index>(m), 1);
    auto rows = rand_ints(rng, m, static_cast<std::uint64_t>(n));
    auto cols = rand_ints(rng, m, static_cast<std::uint64_t>(k));
    Matrix r = randn(rng, n, k);
    c.forward = [rows, cols, r, P](Graph& g) {
      return weighted_sum(g, g.scatter_add(g.param(P("base")), g.param(P("v")), rows, cols), r);
    };
  } else if (op == "pick") {
    add("x", n, k);
    auto cols = rand_ints(rng, static_cast<std::size_t>(n), static_cast<std::uint64_t>(k));
    Matrix r = randn(rng, n, 1);
    c.forward = [cols, r, P](Graph& g) { return weighted_sum(g, g.pick(g.param(P("x")), cols), r); };
  } else if (op == "sum") {
    add("x", n, k);
    c.forward = [P](Graph& g) { return g.scale_shift(g.sum(g.param(P("x"))), 1.3, 0.0); };
  } else if (op == "dropout") {
    const std::uint64_t mask_seed = rng.next();
    unary([mask_seed](Graph& g, Var x) {
      Rng mask_rng(mask_seed);
      return g.dropout(x, 0.3, mask_rng);
    });
  } else {
    throw std::invalid_argument("check_op_gradients: unknown op '" + op + "'");
  }
  return c;
}

}  // namespace

const std::vector<std::string>& checked_ops() {
  static const std::vector<std::string> ops = {
      "affine",     "matmul",          "add",       "sub",     "mul",         "sigmoid",    "tanh",
      "log",        "scale_shift",     "softmax_rows", "masked_softmax_rows", "segment_softmax", "concat_cols",
      "slice_cols", "row_select",      "interleave_rows", "reshape", "weighted_rows", "scale_rows", "where_rows",
      "scatter_add", "pick",           "sum",       "dropout"};
  return ops;
}

ad::GradCheckReport check_op_gradients(const std::string& op, std::uint64_t seed, double h, double tol) {
  OpCase c = make_case(op, seed);
  return ad::finite_diff_check(c.forward, c.params, h, tol);
}

std::vector<SelftestEntry> run_selftest(std::size_t seeds, std::size_t hybrid_seeds) {
  std::vector<SelftestEntry> out;
  for (const auto& op : checked_ops()) {
    for (std::size_t s = 0; s < seeds; ++s) out.push_back({op + "#" + std::to_string(s), check_op_gradients(op, s)});
  }
  for (std::size_t s = 0; s < hybrid_seeds; ++s) out.push_back({"hybrid_loss#" + std::to_string(s), check_hybrid_gradients(s)});
  return out;
}

}  // namespace hnmt
