#include "hnmt/decoder.hpp"

#include "fixtures.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>

using namespace hnmt;
using hnmt::testing::trained_system;

namespace {

// Step-by-step argmax decoding written directly against the NMT interface.
std::vector<int> greedy(HybridModel& m, const Sentence& src) {
  Nmt nmt = m.nmt();
  ad::Graph g(false);
  const auto ids = m.src_vocab.encode(src);
  const std::vector<int> len{static_cast<int>(src.size())};
  auto enc = nmt.encode(g, ids, 1, static_cast<Index>(src.size()), len);
  ad::Var s = enc.init_state, c = nmt.initial_context(g, 1);
  std::vector<int> out;
  int prev = Vocabulary::kBos;
  const std::size_t max_len = 2 * src.size() + 5;
  while (out.size() < max_len) {
    const std::vector<int> y{prev};
    auto st = nmt.step(g, enc, s, c, y);
    const Matrix& p = g.value(st.probs);
    Index best = 0;
    for (Index w = 1; w < p.cols(); ++w)
      if (p(0, w) > p(0, best)) best = w;
    if (out.size() + 1 == max_len) best = Vocabulary::kEos;
    out.push_back(static_cast<int>(best));
    if (best == Vocabulary::kEos) break;
    prev = static_cast<int>(best);
    s = st.state;
    c = st.context;
  }
  return out;
}

}  // namespace

TEST_SUITE("decoder") {
  TEST_CASE("beam 1 equals greedy argmax decoding") {
    auto& s = trained_system();
    DecodeOptions o;
    o.beam = 1;
    const Translator tr(s.nmt, nullptr, o);
    for (std::size_t i = 0; i < 30; ++i) CHECK(tr.beam_search(s.test.source[i]).tokens == greedy(s.nmt, s.test.source[i]));
  }

  TEST_CASE("beam 10 never scores below beam 1") {
    auto& s = trained_system();
    DecodeOptions o1, o10;
    o1.beam = 1;
    o10.beam = 10;
    const Translator t1(s.hybrid, &s.smt, o1), t10(s.hybrid, &s.smt, o10);
    for (std::size_t i = 0; i < 100; ++i) {
      const auto& src = s.test.source[i];
      CHECK(t10.beam_search(src, i).score >= t1.beam_search(src, i).score);
    }
  }

  TEST_CASE("gate pinned at 0 reproduces pure NMT search") {
    auto& s = trained_system();
    DecodeOptions z;
    z.fixed_gate = 0.0;
    const Translator pinned(s.hybrid, &s.smt, z), plain(s.hybrid, nullptr, DecodeOptions{});
    for (std::size_t i = 0; i < 40; ++i) {
      const auto a = pinned.beam_search(s.test.source[i], i), b = plain.beam_search(s.test.source[i], i);
      CHECK(a.tokens == b.tokens);
      CHECK(a.score == b.score);
    }
  }

  TEST_CASE("teacher-forced replay reproduces hypothesis scores") {
    auto& s = trained_system();
    for (std::optional<double> gate : {std::optional<double>{}, std::optional<double>{0.2}}) {
      DecodeOptions o;
      o.fixed_gate = gate;
      const Translator tr(s.hybrid, &s.smt, o);
      for (std::size_t i = 0; i < 30; ++i) {
        const auto h = tr.beam_search(s.test.source[i], i);
        const double replay = score_sequence(s.hybrid, &s.smt, s.test.source[i], h.tokens, o);
        CHECK(std::abs(replay - h.score) <= 1e-9);
      }
    }
    const Translator nmt(s.nmt, nullptr, DecodeOptions{});
    const auto h = nmt.beam_search(s.test.source[0]);
    CHECK(std::abs(score_sequence(s.nmt, nullptr, s.test.source[0], h.tokens, DecodeOptions{}) - h.score) <= 1e-9);
  }

  TEST_CASE("coverage only grows and scores only fall along a hypothesis") {
    auto& s = trained_system();
    DecodeOptions o;
    o.trace = true;
    const Translator tr(s.hybrid, &s.smt, o);
    for (std::size_t i = 0; i < 30; ++i) {
      const auto h = tr.beam_search(s.test.source[i], i);
      std::string prev(s.test.source[i].size(), '0');
      double running = 0.0;
      for (const auto& st : h.steps) {
        for (std::size_t j = 0; j < prev.size(); ++j)
          if (prev[j] == '1') CHECK(st.coverage[j] == '1');
        CHECK(st.logprob <= 0.0);
        running += st.logprob;
        CHECK((st.gate >= 0.0 && st.gate < 1.0));
        CHECK(st.recs.size() <= o.n_rec);
        prev = st.coverage;
      }
      CHECK(running == doctest::Approx(h.score).epsilon(1e-12));
      CHECK(h.tokens.back() == Vocabulary::kEos);
    }
  }

  TEST_CASE("pseudo recommendations keep distributions valid") {
    auto& s = trained_system();
    DecodeOptions o;
    o.pseudo_recs = true;
    o.seed = 3;
    const Translator tr(s.hybrid, &s.smt, o);
    for (std::size_t i = 0; i < 30; ++i) {
      const auto a = tr.translate(s.test.source[i], i);
      const auto b = tr.translate(s.test.source[i], i);
      CHECK(a.best.tokens == b.best.tokens);
      CHECK(std::isfinite(a.best.score));
      for (const auto& st : a.best.steps) CHECK((std::isfinite(st.logprob) && st.logprob <= 0.0));
    }
  }

  TEST_CASE("UNK replacement uses the recorded recommendation") {
    auto& s = trained_system();
    DecodeOptions on, off;
    off.unk_replace = false;
    const Translator t_on(s.hybrid, &s.smt, on), t_off(s.hybrid, &s.smt, off);
    std::size_t replaced = 0;
    for (std::size_t i = 0; i < s.test.size(); ++i) {
      const auto a = t_on.translate(s.test.source[i], i);
      const auto b = t_off.translate(s.test.source[i], i);
      CHECK(a.best.tokens == b.best.tokens);
      REQUIRE(a.output.size() == b.output.size());
      std::size_t unks = 0;
      for (std::size_t k = 0; k < b.output.size(); ++k) {
        if (a.best.tokens[k] != Vocabulary::kUnk) {
          CHECK(a.output[k] == b.output[k]);
          continue;
        }
        ++unks;
        CHECK(b.output[k] == "<unk>");
        const auto& rep = a.best.steps[k].replacement;
        if (rep) {
          CHECK(a.output[k] == s.smt.target_vocab.decode(rep->word));
          ++replaced;
        }
      }
      CHECK(b.unk_left == unks);
    }
    CHECK(replaced > 0);
  }

  TEST_CASE("hypothesis without UNK is unchanged by replacement") {
    auto& s = trained_system();
    const Translator tr(s.hybrid, &s.smt, DecodeOptions{});
    Hypothesis h;
    const auto ids = s.hybrid.tgt_vocab.encode(s.test.target[0]);
    for (int id : ids)
      if (id != Vocabulary::kUnk) h.tokens.push_back(id);
    h.tokens.push_back(Vocabulary::kEos);
    h.steps.resize(h.tokens.size());
    std::size_t left = 7;
    const auto out = tr.replace_unks(h, &left);
    CHECK(out == s.hybrid.tgt_vocab.decode(std::vector<int>(h.tokens.begin(), h.tokens.end() - 1)));
    CHECK(left == 0);
  }

  TEST_CASE("length bound forces EOS") {
    auto& s = trained_system();
    DecodeOptions o;
    o.max_len = 2;
    const Translator tr(s.hybrid, &s.smt, o);
    bool any_forced = false;
    for (std::size_t i = 0; i < 20; ++i) {
      const auto h = tr.beam_search(s.test.source[i], i);
      CHECK(h.tokens.size() <= 2);
      CHECK(h.tokens.back() == Vocabulary::kEos);
      if (h.tokens.size() == 2) {
        CHECK(h.forced_eos);
        CHECK(h.steps.back().forced_eos);
        any_forced = true;
      }
    }
    CHECK(any_forced);
    DecodeOptions bad;
    bad.beam = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }

  TEST_CASE("trace JSON describes every step") {
    auto& s = trained_system();
    DecodeOptions o;
    o.trace = true;
    const Translator tr(s.hybrid, &s.smt, o);
    const auto t = tr.translate(s.test.source[1], 1);
    const auto j = nlohmann::json::parse(trace_json(t, s.hybrid, &s.smt));
    CHECK(j["steps"].size() == t.best.steps.size());
    CHECK(j["output"].get<std::string>() == join(t.output));
    for (const auto& st : j["steps"]) {
      CHECK(st.contains("gate"));
      CHECK(st.contains("coverage"));
      CHECK(st["coverage"].get<std::string>().size() == s.test.source[1].size());
    }
  }
}
