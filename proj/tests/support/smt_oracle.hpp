#pragma once

// Brute-force reference scorer for smt::recommend. Shares only the trained
// tables and language models with the implementation: candidate ranking,
// feature assembly, reordering and ordering are recomputed here.

#include "hnmt/rng.hpp"
#include "hnmt/smt_model.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace hnmt::testing {

struct OracleRec {
  int word;
  int src_pos;
  double score;
};

inline std::vector<OracleRec> brute_force_recommend(const smt::SmtModel& m, const std::vector<int>& src,
                                                    const std::vector<int>& prefix, const std::vector<double>& att,
                                                    const smt::CoverageVector& cv, std::size_t n_rec) {
  const auto& tv = m.target_vocab;
  auto lg = [](double p) { return std::log(std::max(p, 1e-12)); };
  const auto& lm = m.unk_lm;
  std::vector<int> hist;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (prefix.size() - i <= static_cast<std::size_t>(lm.order() - 1)) hist.push_back(lm.index(tv.decode(prefix[i])));
  }
  std::vector<OracleRec> all;
  for (std::size_t j = 0; j < src.size(); ++j) {
    if (cv.covered(j)) continue;
    const int s = src[j];
    struct Cand {
      int y;
      double rank;
    };
    std::vector<Cand> cands;
    for (int y = 0; y < static_cast<int>(tv.size()); ++y) {
      const double p = m.tables.fwd_trans.get(s, y);
      if (p == 0.0) continue;
      const double rank = m.weights[0] * p + m.weights[1] * m.tables.bwd_trans.get(y, s) +
                          m.weights[2] * m.tables.fwd_lex.get(s, y) + m.weights[3] * m.tables.bwd_lex.get(y, s);
      cands.push_back({y, rank});
    }
    std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
      return a.rank != b.rank ? a.rank > b.rank : tv.decode(a.y) < tv.decode(b.y);
    });
    if (cands.size() > m.n_tm) cands.resize(m.n_tm);
    double reorder = 0.0;
    if (!att.empty()) {
      double c = 0.0;
      for (std::size_t k = 0; k < att.size(); ++k) c += att[k] * std::abs(static_cast<int>(j) - static_cast<int>(k) - 1);
      reorder = -c;
    }
    for (const auto& c : cands) {
      const auto& word = tv.decode(c.y);
      if (m.stop.contains(word)) continue;
      const double f[6] = {lg(m.tables.fwd_trans.get(s, c.y)), lg(m.tables.bwd_trans.get(c.y, s)),
                           lg(m.tables.fwd_lex.get(s, c.y)),   lg(m.tables.bwd_lex.get(c.y, s)),
                           lm.logprob(hist, lm.index(word)),   reorder};
      double score = 0.0;
      for (int k = 0; k < 6; ++k) score += m.weights[k] * f[k];
      all.push_back({c.y, static_cast<int>(j), score});
    }
  }
  std::stable_sort(all.begin(), all.end(), [&](const OracleRec& a, const OracleRec& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.src_pos != b.src_pos) return a.src_pos < b.src_pos;
    return tv.decode(a.word) < tv.decode(b.word);
  });
  if (all.size() > n_rec) all.resize(n_rec);
  return all;
}

struct RandomState {
  std::vector<int> src;
  std::vector<int> prefix;
  std::vector<double> att;
  smt::CoverageVector cv;
};

/// Source ids drawn from real words, a random target prefix, random (or, at
/// the first step, absent) attention and random coverage.
inline RandomState random_state(const smt::SmtModel& m, Rng& rng) {
  RandomState st;
  const auto n = 1 + rng.below(8);
  const auto ns = m.source_vocab.size() - Vocabulary::kReserved;
  const auto nt = m.target_vocab.size() - Vocabulary::kReserved;
  for (std::uint64_t i = 0; i < n; ++i) st.src.push_back(Vocabulary::kReserved + static_cast<int>(rng.below(ns)));
  const auto plen = rng.below(6);
  for (std::uint64_t i = 0; i < plen; ++i) {
    const bool unk = rng.uniform() < 0.1;
    st.prefix.push_back(unk ? Vocabulary::kUnk : Vocabulary::kReserved + static_cast<int>(rng.below(nt)));
  }
  if (plen > 0) {
    double z = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      st.att.push_back(rng.uniform() + 1e-3);
      z += st.att.back();
    }
    for (auto& a : st.att) a /= z;
  }
  st.cv = smt::CoverageVector(n);
  for (std::uint64_t i = 0; i < n; ++i)
    if (rng.uniform() < 0.3) st.cv.set(i);
  return st;
}

}  // namespace hnmt::testing
