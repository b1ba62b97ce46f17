#pragma once

#include "hnmt/decoder.hpp"
#include "hnmt/synthetic.hpp"
#include "hnmt/training.hpp"

namespace hnmt::testing {

inline TrainConfig small_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.nmt.emb = 8;
  cfg.nmt.hidden = 16;
  cfg.nmt.att = 16;
  cfg.nmt.readout = 16;
  cfg.advisor.cls_h1 = 16;
  cfg.advisor.cls_h2 = 8;
  cfg.advisor.gate_h1 = 16;
  cfg.advisor.gate_h2 = 8;
  cfg.batch_size = 16;
  return cfg;
}

/// A briefly trained NMT model, its hybrid successor and SMT tables on the
/// lexicon_rare task. Quality is modest; tests use it for structural checks.
struct TrainedSystem {
  SyntheticLanguage lang;
  ParallelCorpus train, dev, test;
  TrainConfig cfg;
  HybridModel nmt;
  smt::SmtModel smt;
  HybridModel hybrid;

  TrainedSystem()
      : lang(
            [] {
              SyntheticOptions o;
              o.task = SyntheticTask::kLexiconRare;
              o.num_types = 30;
              o.min_len = 3;
              o.max_len = 7;
              return o;
            }(),
            5),
        train(lang.sample(600, 1)),
        dev(lang.sample(60, 2)),
        test(lang.sample(100, 3)),
        cfg(small_config(5)) {
    cfg.vocab_cap = lang.common_vocab_cap();
    cfg.epochs = 4;
    cfg.hybrid_epochs = 1;
    nmt = pretrain(train, dev, cfg).best;
    smt = smt::train_smt(train, nmt.tgt_vocab, smt::StopList::english_default(), cfg.smt_options());
    hybrid = train_hybrid(train, dev, nmt, smt, cfg).best;
  }
};

inline TrainedSystem& trained_system() {
  static TrainedSystem s;
  return s;
}

}  // namespace hnmt::testing
