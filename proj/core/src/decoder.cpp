#include "hnmt/decoder.hpp"

#include "hnmt/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace hnmt {

using ad::Graph;
using ad::Var;

void DecodeOptions::validate() const {
  if (beam < 1) throw std::invalid_argument("decode: beam must be >= 1");
  if (n_rec < 1) throw std::invalid_argument("decode: n_rec must be >= 1");
  if (fixed_gate && (*fixed_gate < 0.0 || *fixed_gate > 1.0)) throw std::invalid_argument("decode: fixed gate outside [0, 1]");
}

Translator::Translator(HybridModel& model, const smt::SmtModel* smt, DecodeOptions opts)
    : model_(&model), smt_(smt), opts_(opts) {
  opts_.validate();
  if (smt_) bridge_ = VocabBridge::build(model.tgt_vocab, smt_->target_vocab);
}

namespace {

struct Expansion {
  double score;
  int parent;
  int word;
};

}  // namespace

Hypothesis Translator::beam_search(const Sentence& src, std::uint64_t sentence_index) const {
  Hypothesis root;
  if (src.empty()) {
    root.tokens.push_back(Vocabulary::kEos);
    return root;
  }
  const Index T = static_cast<Index>(src.size());
  const std::size_t max_len = opts_.max_len ? opts_.max_len : 2 * src.size() + 5;
  const bool advised = this->advised();
  Nmt nmt = model_->nmt();
  std::optional<Advisor> advisor;
  if (advised) advisor.emplace(model_->advisor());
  std::vector<int> smt_src;
  if (smt_) smt_src = smt_->source_vocab.encode(src);
  Rng pseudo_rng = Rng::derive(opts_.seed, sentence_index);

  Graph g(false);
  const std::vector<int> ids = model_->src_vocab.encode(src);
  const std::vector<int> len{static_cast<int>(T)};
  Encoded enc1 = nmt.encode(g, ids, 1, T, len);

  root.cv = smt::CoverageVector(src.size());
  std::vector<Hypothesis> live{root};
  std::vector<Hypothesis> finished;
  Var S = enc1.init_state;
  Var C = nmt.initial_context(g, 1);
  const Index V = nmt.config().tgt_vocab;

  for (std::size_t t = 0; !live.empty(); ++t) {
    const std::size_t k = live.size();
    Encoded enc = k == 1 ? enc1 : nmt.select(g, enc1, std::vector<int>(k, 0));
    std::vector<int> y_prev(k);
    for (std::size_t i = 0; i < k; ++i) y_prev[i] = live[i].tokens.empty() ? Vocabulary::kBos : live[i].tokens.back();
    StepOut out = nmt.step(g, enc, S, C, y_prev);

    std::vector<std::vector<smt::Recommendation>> recs(k);
    Var probs = out.probs;
    Matrix gate_values = Matrix::Zero(static_cast<Index>(k), 1);
    if (smt_) {
      for (std::size_t i = 0; i < k; ++i) {
        recs[i] = opts_.pseudo_recs ? smt::pseudo_recommend(*smt_, live[i].cv, opts_.n_rec, pseudo_rng)
                                    : smt::recommend(*smt_, smt_src, live[i].prefix, live[i].prev_att, live[i].cv, opts_.n_rec);
      }
    }
    if (advised) {
      std::vector<StepVocab> sv(k);
      for (std::size_t i = 0; i < k; ++i) sv[i] = make_step_vocab(recs[i], *bridge_);
      FusionOut f = advisor->fuse(g, out.features, out.probs, sv, opts_.fixed_gate);
      probs = f.probs;
      gate_values = g.value(f.alpha);
    }
    const Matrix& P = g.value(probs);
    const Matrix& A = g.value(out.attention);

    const bool force_eos = t + 1 >= max_len;
    const std::size_t width = opts_.beam - finished.size();
    std::vector<Expansion> cand;
    cand.reserve(k * static_cast<std::size_t>(force_eos ? 1 : V));
    for (std::size_t i = 0; i < k; ++i) {
      for (Index w = 0; w < V; ++w) {
        if (force_eos && w != Vocabulary::kEos) continue;
        const double p = P(static_cast<Index>(i), w);
        if (!(p > 0.0)) continue;
        cand.push_back({live[i].score + std::log(p), static_cast<int>(i), static_cast<int>(w)});
      }
    }
    auto better = [](const Expansion& a, const Expansion& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.word < b.word;
    };
    const std::size_t take = std::min(width, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), better);
    cand.resize(take);

    std::vector<Hypothesis> next;
    std::vector<int> parents;
    for (const Expansion& e : cand) {
      const auto pi = static_cast<std::size_t>(e.parent);
      const Hypothesis& par = live[pi];
      Hypothesis h = par;
      h.score = e.score;
      h.tokens.push_back(e.word);
      StepRecord rec;
      rec.token = e.word;
      rec.logprob = std::log(P(e.parent, e.word));
      rec.gate = gate_values(e.parent, 0);
      rec.forced_eos = force_eos;
      if (opts_.trace) rec.recs = recs[pi];
      if (smt_) {
        if (e.word == Vocabulary::kUnk) {
          // The replacement is chosen with the LM over the original vocabulary.
          auto orig = opts_.pseudo_recs ? recs[pi]
                                        : smt::recommend(*smt_, smt_src, par.prefix, par.prev_att, par.cv, opts_.n_rec,
                                                         smt::LmKind::kOriginal);
          if (!orig.empty()) rec.replacement = orig.front();
        } else {
          smt::update_coverage(h.cv, bridge_->nmt_to_smt[static_cast<std::size_t>(e.word)], recs[pi]);
        }
        h.prefix.push_back(bridge_->nmt_to_smt[static_cast<std::size_t>(e.word)]);
        h.prev_att.assign(A.row(e.parent).data(), A.row(e.parent).data() + T);
      }
      rec.coverage = h.cv.to_string();
      h.steps.push_back(std::move(rec));
      if (e.word == Vocabulary::kEos) {
        h.forced_eos = force_eos;
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
        parents.push_back(e.parent);
      }
    }
    live = std::move(next);
    if (live.empty() || finished.size() >= opts_.beam) break;
    // Scores only decrease, so no live hypothesis can overtake this one.
    double best_live = -std::numeric_limits<double>::infinity();
    for (const auto& h : live) best_live = std::max(best_live, h.score);
    double best_done = -std::numeric_limits<double>::infinity();
    for (const auto& h : finished) best_done = std::max(best_done, h.score);
    if (best_done >= best_live) break;
    S = g.row_select(out.state, parents);
    C = g.row_select(out.context, parents);
  }

  if (finished.empty()) throw NumericError("beam search produced no hypothesis");
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (finished[i].score > finished[best].score) best = i;
  }
  return finished[best];
}

Sentence Translator::replace_unks(const Hypothesis& hyp, std::size_t* unk_left) const {
  Sentence out;
  std::size_t left = 0;
  for (std::size_t i = 0; i < hyp.tokens.size(); ++i) {
    const int tok = hyp.tokens[i];
    if (tok == Vocabulary::kEos) break;
    if (tok == Vocabulary::kUnk) {
      const auto& rep = i < hyp.steps.size() ? hyp.steps[i].replacement : std::nullopt;
      if (opts_.unk_replace && rep && smt_) {
        out.push_back(smt_->target_vocab.decode(rep->word));
        continue;
      }
      ++left;
    }
    out.push_back(model_->tgt_vocab.decode(tok));
  }
  if (unk_left) *unk_left = left;
  return out;
}

Translation Translator::translate(const Sentence& src, std::uint64_t sentence_index) const {
  Translation tr;
  tr.best = beam_search(src, sentence_index);
  tr.output = replace_unks(tr.best, &tr.unk_left);
  return tr;
}

double score_sequence(HybridModel& model, const smt::SmtModel* smt, const Sentence& src, std::span<const int> tokens,
                      const DecodeOptions& opts) {
  if (tokens.empty() || tokens.back() != Vocabulary::kEos) throw std::invalid_argument("score_sequence: tokens must end with EOS");
  ParallelCorpus one;
  Sentence tgt;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) tgt.push_back(model.tgt_vocab.decode(tokens[i]));
  one.source.push_back(src);
  one.target.push_back(tgt);
  const std::size_t idx = 0;
  // An empty target is scored as EOS alone.
  Batch b = make_batch(one, model.src_vocab, model.tgt_vocab, std::span<const std::size_t>(&idx, 1));
  Graph g(false);
  if (smt && model.has_advisor()) {
    const VocabBridge bridge = VocabBridge::build(model.tgt_vocab, smt->target_vocab);
    HybridLossOptions h{smt, &bridge, opts.n_rec, opts.fixed_gate};
    return -g.scalar(nll_loss(g, model, b, one, &h));
  }
  return -g.scalar(nll_loss(g, model, b, one, nullptr));
}

std::string trace_json(const Translation& tr, const HybridModel& model, const smt::SmtModel* smt) {
  using nlohmann::json;
  auto word = [&](int smt_id) { return smt ? smt->target_vocab.decode(smt_id) : std::string(); };
  json steps = json::array();
  for (const auto& s : tr.best.steps) {
    json js = {{"token", model.tgt_vocab.decode(s.token)},
               {"logprob", s.logprob},
               {"gate", s.gate},
               {"coverage", s.coverage}};
    if (!s.recs.empty()) {
      json recs = json::array();
      for (const auto& r : s.recs) recs.push_back({{"word", word(r.word)}, {"src_pos", r.src_pos}, {"score", r.score}});
      js["recs"] = recs;
    }
    if (s.replacement) js["replacement"] = word(s.replacement->word);
    if (s.forced_eos) js["forced_eos"] = true;
    steps.push_back(js);
  }
  json out = {{"score", tr.best.score},
              {"output", join(tr.output)},
              {"unk_left", tr.unk_left},
              {"forced_eos", tr.best.forced_eos},
              {"steps", steps}};
  return out.dump();
}

}  // namespace hnmt
