// Acceptance runner: one PASS/FAIL line per criterion A1..A9.

#include "cli.hpp"

#include "hnmt/ablation.hpp"
#include "hnmt/eval.hpp"
#include "hnmt/ibm1.hpp"
#include "hnmt/selftest.hpp"
#include "hnmt/synthetic.hpp"
#include "hnmt/training.hpp"

#include "fixtures.hpp"
#include "smt_oracle.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace hnmt;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- A1
Outcome gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t coords = 0;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = check_hybrid_gradients(seed);
    worst = std::max(worst, r.max_rel_error);
    coords += r.coords_checked;
    ok = ok && r.passed && r.max_rel_error <= 1e-4;
  }
  const double secs = since(t0);
  return {ok && secs < 120.0,
          fmt("20 seeds, %zu coordinates, max relative error %.3g (tol 1e-4), %.1fs (limit 120s)", coords, worst, secs)};
}

// ---------------------------------------------------------------- A2
Outcome fusion() {
  auto& s = testing::trained_system();
  const auto bridge = VocabBridge::build(s.hybrid.tgt_vocab, s.smt.target_vocab);
  Rng rng(11);
  double max_dev_zero = 0.0, max_sum_err = 0.0;
  std::size_t steps = 0;
  std::size_t sentence = 0;
  // Random walks through the decoder: tokens are sampled from the fused
  // distribution and SMT state follows as in search.
  while (steps < 1000) {
    const Sentence& src = s.test.source[sentence++ % s.test.size()];
    Nmt nmt = s.hybrid.nmt();
    Advisor adv = s.hybrid.advisor();
    ad::Graph g(false);
    const auto ids = s.hybrid.src_vocab.encode(src);
    const auto smt_src = s.smt.source_vocab.encode(src);
    const std::vector<int> len{static_cast<int>(src.size())};
    auto enc = nmt.encode(g, ids, 1, static_cast<Index>(src.size()), len);
    ad::Var st = enc.init_state, ctx = nmt.initial_context(g, 1);
    smt::CoverageVector cv(src.size());
    std::vector<int> prefix;
    std::vector<double> prev_att;
    int prev = Vocabulary::kBos;
    for (std::size_t t = 0; t < 2 * src.size() + 5 && steps < 1000; ++t, ++steps) {
      const std::vector<int> y{prev};
      auto out = nmt.step(g, enc, st, ctx, y);
      const auto recs = smt::recommend(s.smt, smt_src, prefix, prev_att, cv, 25);
      const std::vector<StepVocab> sv{make_step_vocab(recs, bridge)};
      const auto fused = adv.fuse(g, out.features, out.probs, sv);
      const auto zero = adv.fuse(g, out.features, out.probs, sv, 0.0);
      const Matrix& P = g.value(fused.probs);
      max_sum_err = std::max(max_sum_err, std::abs(P.sum() - 1.0));
      max_dev_zero = std::max(max_dev_zero, (g.value(zero.probs) - g.value(out.probs)).cwiseAbs().maxCoeff());
      double u = rng.uniform(), acc = 0.0;
      int next = static_cast<int>(P.cols()) - 1;
      for (Index w = 0; w < P.cols(); ++w)
        if ((acc += P(0, w)) >= u) {
          next = static_cast<int>(w);
          break;
        }
      if (next == Vocabulary::kEos) break;
      const int smt_id = bridge.nmt_to_smt[static_cast<std::size_t>(next)];
      smt::update_coverage(cv, smt_id, recs);
      prefix.push_back(smt_id);
      const Matrix& A = g.value(out.attention);
      prev_att.assign(A.data(), A.data() + A.size());
      prev = next;
      st = out.state;
      ctx = out.context;
    }
  }

  // Beam output with the gate pinned at 0 against pure NMT search.
  DecodeOptions z;
  z.fixed_gate = 0.0;
  z.unk_replace = false;
  DecodeOptions plain_opts;
  plain_opts.unk_replace = false;
  const Translator pinned(s.hybrid, &s.smt, z), plain(s.hybrid, nullptr, plain_opts);
  std::size_t same = 0;
  for (std::size_t i = 0; i < s.test.size(); ++i)
    same += pinned.beam_search(s.test.source[i], i).tokens == plain.beam_search(s.test.source[i], i).tokens ? 1 : 0;

  // One-hot attention turns the expected reordering cost into the hard one.
  Rng r2(12);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(r2.below(20));
    const int prev_pos = static_cast<int>(r2.below(static_cast<std::uint64_t>(n)));
    const int sp = static_cast<int>(r2.below(static_cast<std::uint64_t>(n)));
    std::vector<double> onehot(static_cast<std::size_t>(n), 0.0);
    onehot[static_cast<std::size_t>(prev_pos)] = 1.0;
    if (smt::reorder_cost_soft(sp, onehot) != smt::reorder_cost_hard(sp, prev_pos)) ++mismatches;
  }

  const bool ok = max_dev_zero <= 1e-12 && same == s.test.size() && mismatches == 0 && max_sum_err <= 1e-9;
  return {ok, fmt("alpha=0 max |p - p_nmt| %.2g, beam identical %zu/%zu, one-hot soft!=hard %zu/1000, "
                  "max |sum p - 1| %.2g over %zu steps",
                  max_dev_zero, same, s.test.size(), mismatches, max_sum_err, steps)};
}

// ---------------------------------------------------------------- A3
struct TargetReached {
  std::size_t epoch;
  double accuracy;
};

Outcome trainability() {
  const auto t0 = Clock::now();
  SyntheticOptions o;
  o.task = SyntheticTask::kLexicon;
  o.num_types = 47;
  const SyntheticLanguage lang(o, 1);
  const auto train = lang.sample(2000, 1), dev = lang.sample(200, 2);
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.vocab_cap = 50;
  cfg.epochs = 30;
  cfg.nmt.emb = 16;
  cfg.nmt.hidden = 32;
  cfg.nmt.att = 32;
  cfg.nmt.readout = 32;
  double last = 0.0;
  std::size_t vocab = 0;
  auto on_epoch = [&](const EpochLog& e, const HybridModel& m) {
    HybridModel copy = m;
    vocab = copy.tgt_vocab.size();
    DecodeOptions d;
    d.beam = 1;
    const Translator tr(copy, nullptr, d);
    last = token_accuracy(outputs_of(translate_all(tr, dev.source)), dev.target);
    if (last >= 0.95) throw TargetReached{e.epoch, last};
  };
  try {
    pretrain(train, dev, cfg, on_epoch);
  } catch (const TargetReached& r) {
    const double secs = since(t0);
    return {secs < 600.0, fmt("dev token accuracy %.4f at epoch %zu (vocab %zu), %.1fs (limit 600s)", r.accuracy,
                              r.epoch, vocab, secs)};
  }
  return {false, fmt("dev token accuracy %.4f after 30 epochs (need 0.95)", last)};
}

// ---------------------------------------------------------------- A4, A5
struct AblationRun {
  SyntheticLanguage lang;
  ParallelCorpus test;
  std::vector<AblationRow> rows;
};

AblationRun ablation_run(SyntheticTask task, std::uint64_t seed) {
  SyntheticOptions o;
  o.task = task;
  o.rare_fraction = 0.1;
  SyntheticLanguage lang(o, seed);
  const auto train = lang.sample(5000, 1), dev = lang.sample(200, 2), test = lang.sample(200, 3);
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.epochs = 2;
  cfg.hybrid_epochs = 2;
  cfg.nmt.emb = 16;
  cfg.nmt.hidden = 32;
  cfg.nmt.att = 32;
  cfg.nmt.readout = 32;
  cfg.vocab_cap = lang.common_vocab_cap();
  auto nmt = pretrain(train, dev, cfg).best;
  const auto smt_model = smt::train_smt(train, nmt.tgt_vocab, smt::StopList::english_default(), cfg.smt_options());
  auto hybrid = train_hybrid(train, dev, nmt, smt_model, cfg).best;
  DecodeOptions d;
  d.beam = 10;
  auto rows = run_ablation(nmt, hybrid, smt_model, test, d);
  return {std::move(lang), test, std::move(rows)};
}

const AblationRow& row(const std::vector<AblationRow>& rows, const std::string& name) {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw std::logic_error("no ablation row " + name);
}

Outcome ablation_ordering(const fs::path& workdir) {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  std::ofstream table(workdir / "A4_ablation.txt");
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto run = ablation_run(SyntheticTask::kSwap, seed);
    table << "seed " << seed << "\n" << ablation_table(run.rows) << "\n";
    const double base = row(run.rows, "baseline").bleu.bleu, hyb = row(run.rows, "+SMT rec").bleu.bleu;
    const double zero = row(run.rows, "alpha=0").bleu.bleu, pseudo = row(run.rows, "pseudo recs").bleu.bleu;
    const bool s_ok = hyb >= base && hyb > zero && hyb > pseudo;
    ok = ok && s_ok;
    detail += fmt("seed %llu: hybrid %.4f nmt %.4f alpha0 %.4f pseudo %.4f%s; ", static_cast<unsigned long long>(seed),
                  hyb, base, zero, pseudo, s_ok ? "" : " (violated)");
  }
  return {ok, detail + fmt("%.1fs", since(t0))};
}

Outcome unk_replacement(const fs::path& workdir) {
  const auto t0 = Clock::now();
  const auto run = ablation_run(SyntheticTask::kLexiconRare, 1);
  std::ofstream(workdir / "A5_ablation.txt") << ablation_table(run.rows);
  const auto& rec = row(run.rows, "+SMT rec");
  const auto& rep = row(run.rows, "+UNK replace");
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < run.test.size(); ++i) {
    const auto& src = run.test.source[i];
    for (std::size_t j = 0; j < src.size(); ++j) {
      if (!run.lang.is_rare_source(src[j])) continue;
      ++total;
      if (j < rep.outputs[i].size() && rep.outputs[i][j] == run.lang.dictionary().at(src[j])) ++hits;
    }
  }
  const double rare_acc = total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
  const bool ok = rep.token_accuracy > rec.token_accuracy && total > 0 && rare_acc >= 0.80;
  return {ok, fmt("token accuracy replace %.4f vs no-replace %.4f, rare words correct %zu/%zu = %.3f (need 0.80), %.1fs",
                  rep.token_accuracy, rec.token_accuracy, hits, total, rare_acc, since(t0))};
}

// ---------------------------------------------------------------- A6
Outcome oracle() {
  SyntheticOptions o;
  o.task = SyntheticTask::kLexiconRare;
  const SyntheticLanguage lang(o, 8);
  const auto c = lang.sample(800, 1);
  const auto m = smt::train_smt(c, Vocabulary::build(c.target, lang.common_vocab_cap()),
                                smt::StopList::english_default(), smt::SmtOptions{});
  Rng rng(23);
  std::size_t equal = 0, entries = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto st = testing::random_state(m, rng);
    const std::size_t n_rec = 1 + rng.below(25);
    const auto got = smt::recommend(m, st.src, st.prefix, st.att, st.cv, n_rec);
    const auto want = testing::brute_force_recommend(m, st.src, st.prefix, st.att, st.cv, n_rec);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i)
      same = got[i].word == want[i].word && got[i].src_pos == want[i].src_pos && got[i].score == want[i].score;
    equal += same ? 1 : 0;
    entries += got.size();
  }
  return {equal == 200, fmt("%zu/200 states identical (%zu recommendations compared)", equal, entries)};
}

// ---------------------------------------------------------------- A7
Outcome em() {
  // a=0, b=1; x=0, y=1; pairs (a, x) and (a b, x y)
  const smt::IdCorpus src = {{0}, {0, 1}}, tgt = {{0}, {0, 1}};
  int reached = -1;
  bool monotone = true;
  for (int iters = 1; iters <= 20; ++iters) {
    const auto m = smt::train_ibm1(src, tgt, 2, iters);
    for (std::size_t i = 1; i < m.log_likelihood.size(); ++i)
      monotone = monotone && m.log_likelihood[i] >= m.log_likelihood[i - 1] - 1e-12;
    if (reached < 0 && m.table.get(0, 0) > 0.9 && m.table.get(1, 1) > 0.9) reached = iters;
  }
  const auto m = smt::train_ibm1(src, tgt, 2, 20);
  return {reached > 0 && monotone,
          fmt("t(x|a)=%.4f t(y|b)=%.4f after 20 iterations, both > 0.9 from iteration %d, log-likelihood %s",
              m.table.get(0, 0), m.table.get(1, 1), reached, monotone ? "non-decreasing" : "DECREASED")};
}

// ---------------------------------------------------------------- A8
Outcome metric() {
  auto s = [](std::initializer_list<const char*> ls) {
    std::vector<Sentence> out;
    for (const char* l : ls) out.push_back(tokenize(l));
    return out;
  };
  std::vector<std::string> failed;
  const auto same = s({"the cat sat on the mat today", "a dog ran in the park"});
  if (std::abs(bleu(same, same).bleu - 1.0) > 1e-15) failed.push_back("identity");
  const auto clip = bleu(s({"the the the the the the the"}), s({"the cat is on the mat"}));
  if (clip.matches[0] != 2 || clip.totals[0] != 7) failed.push_back("clipped 2/7");
  const auto z = bleu(s({"a b c d x f g h"}), s({"a b c y d e f g h"}));
  if (z.matches[3] != 0 || z.bleu != 0.0) failed.push_back("zero 4-gram");
  const auto bp = bleu(s({"a b c d e"}), s({"a b c d e f g h i j"}));
  if (std::abs(bp.brevity_penalty - std::exp(1.0 - 10.0 / 5.0)) > 1e-14) failed.push_back("brevity");
  const auto hand = bleu(s({"a b c d e"}), s({"a b c d f"}));
  const double want = std::exp(0.25 * (std::log(4.0 / 5) + std::log(3.0 / 4) + std::log(2.0 / 3) + std::log(0.5)));
  if (std::abs(hand.bleu - want) > 1e-14) failed.push_back("hand computed");
  std::string d = "identity, clipped 2/7, zero 4-gram, brevity, hand computed";
  if (!failed.empty()) {
    d = "failed:";
    for (const auto& f : failed) d += " " + f;
  }
  return {failed.empty(), d};
}

// ---------------------------------------------------------------- A9
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void cli_or_throw(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  if (cli::run_cli(args, out, err) != 0) throw std::runtime_error("command failed: " + args[0] + ": " + err.str());
}

void pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  const std::string D = dir.string();
  const std::vector<std::string> dims = {"--set", "emb=12", "--set", "hidden=16", "--set", "att=16", "--set",
                                         "readout=16", "--set", "seed=7"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), dims.begin(), dims.end());
    return a;
  };
  cli_or_throw({"gen-data", "--task", "lexicon_rare", "--train", "800", "--dev", "50", "--test", "50", "--seed", "3",
                "--out", D + "/data"});
  cli_or_throw(with({"pretrain", "--data", D + "/data", "--out", D + "/nmt", "--set", "epochs=2", "--set",
                     "checkpoint_every=1"}));
  cli_or_throw({"train-smt", "--data", D + "/data", "--nmt", D + "/nmt/nmt.ckpt", "--out", D + "/smt"});
  cli_or_throw({"train-hybrid", "--data", D + "/data", "--nmt", D + "/nmt/nmt.ckpt", "--smt", D + "/smt", "--config",
                D + "/nmt/config.txt", "--set", "hybrid_epochs=1", "--out", D + "/hyb"});
  cli_or_throw({"translate", "--model", D + "/hyb/hybrid.ckpt", "--smt", D + "/smt", "--input", D + "/data/test.src",
                "--output", D + "/test.out", "--trace", D + "/trace.jsonl"});
  cli_or_throw({"ablate", "--nmt", D + "/nmt/nmt.ckpt", "--hybrid", D + "/hyb/hybrid.ckpt", "--smt", D + "/smt",
                "--data", D + "/data", "--out", D + "/abl"});
}

// Manifests and training logs carry wall-clock times and absolute paths.
bool compared(const fs::path& p) {
  const auto name = p.filename().string();
  return name.find("manifest") == std::string::npos && name != "train.log";
}

Outcome determinism(const fs::path& workdir) {
  const fs::path a = workdir / "A9_run1", b = workdir / "A9_run2";
  pipeline(a);
  pipeline(b);
  std::size_t files = 0, ckpts = 0;
  std::vector<std::string> differing;
  std::set<std::string> seen;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || !compared(e.path())) continue;
    const auto rel = fs::relative(e.path(), a);
    seen.insert(rel.string());
    ++files;
    if (e.path().extension() == ".ckpt") ++ckpts;
    if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) differing.push_back(rel.string());
  }
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file() && compared(e.path()) && !seen.count(fs::relative(e.path(), b).string()))
      differing.push_back(fs::relative(e.path(), b).string());
  std::string d = fmt("%zu files compared (%zu checkpoints)", files, ckpts);
  for (const auto& f : differing) d += ", differs: " + f;
  return {differing.empty() && ckpts >= 5, d};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string workdir = "acceptance_work";
  std::vector<std::string> only;
  app.add_option("--workdir", workdir, "scratch directory");
  app.add_option("--only", only, "run a subset, e.g. --only A4 A5");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"A1", gradients},
      {"A2", fusion},
      {"A3", trainability},
      {"A4", [&] { return ablation_ordering(workdir); }},
      {"A5", [&] { return unk_replacement(workdir); }},
      {"A6", oracle},
      {"A7", em},
      {"A8", metric},
      {"A9", [&] { return determinism(workdir); }},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failures += r.pass ? 0 : 1;
    std::printf("%s %s  %s\n", name.c_str(), r.pass ? "PASS" : "FAIL", r.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
