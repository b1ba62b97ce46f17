#include "hnmt/decoder.hpp"
#include "hnmt/graph.hpp"
#include "hnmt/hybrid.hpp"
#include "hnmt/rng.hpp"
#include "hnmt/smt_model.hpp"
#include "hnmt/synthetic.hpp"
#include "hnmt/training.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace hnmt;

void BM_Affine(benchmark::State& state) {
  const Index n = state.range(0);
  Rng rng(7);
  ParameterSet ps;
  auto& w = ps.add("W", n, n);
  auto& b = ps.add("b", 1, n);
  Matrix x(16, n);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
  for (Index i = 0; i < w.value.size(); ++i) w.value.data()[i] = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    ad::Graph g(true);
    auto y = g.sum(g.tanh(g.affine(g.constant(x), g.param(w), g.param(b))));
    g.backward(y);
    benchmark::DoNotOptimize(g.value(y)(0, 0));
  }
}
BENCHMARK(BM_Affine)->Arg(32)->Arg(64)->Arg(128);

struct Fixture {
  ParallelCorpus corpus = gen_synthetic(SyntheticTask::kLexiconRare, 500, 3);
  HybridModel model;
  smt::SmtModel smt;

  Fixture() {
    NmtConfig cfg;
    cfg.emb = 16;
    cfg.hidden = 32;
    cfg.att = 32;
    cfg.readout = 32;
    model = HybridModel::create(Vocabulary::build(corpus.source, 50), Vocabulary::build(corpus.target, 50), cfg, 1);
    model.add_advisor(AdvisorConfig{});
    TrainConfig tc;
    smt = smt::train_smt(corpus, model.tgt_vocab, smt::StopList::english_default(), tc.smt_options());
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_DecoderStep(benchmark::State& state) {
  auto& f = fixture();
  const Index n = state.range(0);
  const auto& s = f.corpus.source.front();
  const Index T = static_cast<Index>(s.size());
  std::vector<int> ids, lengths(static_cast<std::size_t>(n), static_cast<int>(T));
  for (Index r = 0; r < n; ++r)
    for (const auto& w : s) ids.push_back(f.model.src_vocab.encode(w));
  std::vector<int> prev(static_cast<std::size_t>(n), Vocabulary::kBos);
  auto nmt = f.model.nmt();
  for (auto _ : state) {
    ad::Graph g(false);
    auto enc = nmt.encode(g, ids, n, T, lengths);
    auto out = nmt.step(g, enc, enc.init_state, nmt.initial_context(g, n), prev);
    benchmark::DoNotOptimize(g.value(out.probs)(0, 0));
  }
}
BENCHMARK(BM_DecoderStep)->Arg(1)->Arg(10);

void BM_Recommend(benchmark::State& state) {
  auto& f = fixture();
  const auto& s = f.corpus.source.front();
  std::vector<int> src;
  for (const auto& w : s) src.push_back(f.smt.source_vocab.encode(w));
  std::vector<int> prefix = {f.smt.target_vocab.encode(f.corpus.target.front().front())};
  std::vector<double> att(src.size(), 1.0 / static_cast<double>(src.size()));
  smt::CoverageVector cv(src.size());
  for (auto _ : state) {
    auto recs = smt::recommend(f.smt, src, prefix, att, cv, static_cast<std::size_t>(state.range(0)));
    benchmark::DoNotOptimize(recs.data());
  }
}
BENCHMARK(BM_Recommend)->Arg(5)->Arg(25);

void BM_TranslateSentence(benchmark::State& state) {
  auto& f = fixture();
  DecodeOptions o;
  o.beam = static_cast<std::size_t>(state.range(0));
  const Translator tr(f.model, &f.smt, o);
  for (auto _ : state) {
    auto t = tr.translate(f.corpus.source.front());
    benchmark::DoNotOptimize(t.output.data());
  }
}
BENCHMARK(BM_TranslateSentence)->Arg(1)->Arg(10);

}  // namespace
BENCHMARK_MAIN();
