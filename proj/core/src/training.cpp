#include "hnmt/training.hpp"

#include "hnmt/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hnmt {

using ad::Graph;
using ad::Var;

namespace {

constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;
constexpr std::uint64_t kHybridShuffleStream = 12;
constexpr std::uint64_t kHybridDropoutStream = 13;

const char* kWeightKeys[smt::kNumFeatures] = {"w_fwd_trans", "w_bwd_trans", "w_fwd_lex",
                                              "w_bwd_lex",   "w_lm",        "w_reorder"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d)) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  }
  return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("config: " + key + " expects a non-negative integer, got '" + v + "'");
  }
  return std::stoull(v);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: " + key + " expects true/false, got '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

// ---- configuration ----

void TrainConfig::validate() const {
  if (phase != "pretrain" && phase != "hybrid") throw std::invalid_argument("config: phase must be pretrain or hybrid");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (vocab_cap != 0 && vocab_cap < 4) throw std::invalid_argument("config: vocab_cap must be 0 or >= 4");
  if (n_tm < 1 || n_rec < 1) throw std::invalid_argument("config: n_tm and n_rec must be >= 1");
  if (ibm_iters < 1 || lm_order < 1 || lm_order > 4) throw std::invalid_argument("config: bad ibm_iters or lm_order");
  if (beam < 1) throw std::invalid_argument("config: beam must be >= 1");
  if (fixed_gate && (*fixed_gate < 0.0 || *fixed_gate > 1.0)) throw std::invalid_argument("config: fixed_gate outside [0, 1]");
  if (!(rho > 0.0 && rho < 1.0) || !(eps > 0.0)) throw std::invalid_argument("config: bad Adadelta constants");
  if (!(nmt.init_scale > 0.0) || nmt.dropout < 0.0 || nmt.dropout >= 1.0) throw std::invalid_argument("config: bad init_scale or dropout");
  if (nmt.emb < 1 || nmt.hidden < 1 || nmt.att < 1 || nmt.readout < 1) throw std::invalid_argument("config: dimensions must be positive");
  advisor.validate();
}

void TrainConfig::set(const std::string& key, const std::string& v) {
  auto idx = [&] { return static_cast<Index>(to_uint(key, v)); };
  if (key == "phase") phase = v;
  else if (key == "seed") seed = to_uint(key, v);
  else if (key == "vocab_cap") vocab_cap = to_uint(key, v);
  else if (key == "batch_size") batch_size = to_uint(key, v);
  else if (key == "max_len") max_len = to_uint(key, v);
  else if (key == "epochs") epochs = to_uint(key, v);
  else if (key == "hybrid_epochs") hybrid_epochs = to_uint(key, v);
  else if (key == "checkpoint_every") checkpoint_every = to_uint(key, v);
  else if (key == "emb") nmt.emb = idx();
  else if (key == "hidden") nmt.hidden = idx();
  else if (key == "att") nmt.att = idx();
  else if (key == "readout") nmt.readout = idx();
  else if (key == "init_scale") nmt.init_scale = to_double(key, v);
  else if (key == "dropout") nmt.dropout = to_double(key, v);
  else if (key == "cls_h1") advisor.cls_h1 = idx();
  else if (key == "cls_h2") advisor.cls_h2 = idx();
  else if (key == "gate_h1") advisor.gate_h1 = idx();
  else if (key == "gate_h2") advisor.gate_h2 = idx();
  else if (key == "n_tm") n_tm = to_uint(key, v);
  else if (key == "n_rec") n_rec = to_uint(key, v);
  else if (key == "ibm_iters") ibm_iters = static_cast<int>(to_uint(key, v));
  else if (key == "lm_order") lm_order = static_cast<int>(to_uint(key, v));
  else if (key == "lm_floor") lm_floor = to_double(key, v);
  else if (key == "rho") rho = to_double(key, v);
  else if (key == "eps") eps = to_double(key, v);
  else if (key == "beam") beam = to_uint(key, v);
  else if (key == "fixed_gate") fixed_gate = v == "none" ? std::nullopt : std::optional<double>(to_double(key, v));
  else if (key == "pseudo_recs") pseudo_recs = to_bool(key, v);
  else {
    for (int f = 0; f < smt::kNumFeatures; ++f) {
      if (key == kWeightKeys[f]) {
        weights.lambda[static_cast<std::size_t>(f)] = to_double(key, v);
        return;
      }
    }
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

TrainConfig TrainConfig::parse(std::string_view text) {
  TrainConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  std::map<std::string, std::string> m;
  std::istringstream in(to_string());
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

std::string TrainConfig::to_string() const {
  std::ostringstream o;
  o << "phase=" << phase << "\n"
    << "seed=" << seed << "\n"
    << "vocab_cap=" << vocab_cap << "\n"
    << "batch_size=" << batch_size << "\n"
    << "max_len=" << max_len << "\n"
    << "epochs=" << epochs << "\n"
    << "hybrid_epochs=" << hybrid_epochs << "\n"
    << "checkpoint_every=" << checkpoint_every << "\n"
    << "emb=" << nmt.emb << "\n"
    << "hidden=" << nmt.hidden << "\n"
    << "att=" << nmt.att << "\n"
    << "readout=" << nmt.readout << "\n"
    << "init_scale=" << num(nmt.init_scale) << "\n"
    << "dropout=" << num(nmt.dropout) << "\n"
    << "cls_h1=" << advisor.cls_h1 << "\n"
    << "cls_h2=" << advisor.cls_h2 << "\n"
    << "gate_h1=" << advisor.gate_h1 << "\n"
    << "gate_h2=" << advisor.gate_h2 << "\n"
    << "n_tm=" << n_tm << "\n"
    << "n_rec=" << n_rec << "\n"
    << "ibm_iters=" << ibm_iters << "\n"
    << "lm_order=" << lm_order << "\n"
    << "lm_floor=" << num(lm_floor) << "\n";
  for (int f = 0; f < smt::kNumFeatures; ++f) o << kWeightKeys[f] << "=" << num(weights[f]) << "\n";
  o << "rho=" << num(rho) << "\n"
    << "eps=" << num(eps) << "\n"
    << "beam=" << beam << "\n"
    << "fixed_gate=" << (fixed_gate ? num(*fixed_gate) : std::string("none")) << "\n"
    << "pseudo_recs=" << (pseudo_recs ? "true" : "false") << "\n";
  return o.str();
}

smt::SmtOptions TrainConfig::smt_options() const {
  smt::SmtOptions o;
  o.ibm_iters = ibm_iters;
  o.lm.order = lm_order;
  o.lm.floor = lm_floor;
  o.weights = weights;
  o.n_tm = n_tm;
  return o;
}

// ---- optimizer ----

Adadelta::Adadelta(const ParameterSet& params, double rho, double eps) : rho_(rho), eps_(eps) {
  for (const auto& p : params) {
    eg2_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    edx2_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adadelta::step(ParameterSet& params) {
  if (params.size() != eg2_.size()) throw ShapeError("adadelta: parameter count changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (p.grad.size() == 0) continue;
    if (p.grad.rows() != eg2_[i].rows() || p.grad.cols() != eg2_[i].cols()) throw ShapeError("adadelta: shape of " + p.name);
    Matrix& eg = eg2_[i];
    Matrix& edx = edx2_[i];
    eg = rho_ * eg + (1.0 - rho_) * p.grad.cwiseProduct(p.grad);
    Matrix dx = -((edx.array() + eps_).sqrt() / (eg.array() + eps_).sqrt() * p.grad.array()).matrix();
    edx = rho_ * edx + (1.0 - rho_) * dx.cwiseProduct(dx);
    p.value += dx;
  }
}

// ---- loss ----

Var nll_loss(Graph& g, HybridModel& model, const Batch& batch, const ParallelCorpus& corpus,
             const HybridLossOptions* hybrid, Rng* dropout_rng) {
  if (batch.size < 1) throw std::invalid_argument("nll_loss: empty batch");
  const Index n = batch.size;
  const Index T = batch.tgt_len;
  Nmt nmt = model.nmt();
  Encoded enc = nmt.encode(g, batch.src, n, batch.src_len, batch.src_lengths);

  std::optional<Advisor> advisor;
  std::vector<std::vector<int>> smt_src, prefix;
  std::vector<std::vector<double>> prev_att;
  std::vector<smt::CoverageVector> cv;
  if (hybrid) {
    if (!hybrid->smt || !hybrid->bridge) throw std::invalid_argument("nll_loss: hybrid options lack SMT tables");
    advisor.emplace(model.advisor());
    for (Index i = 0; i < n; ++i) {
      const auto& src = corpus.source.at(batch.pair_index[static_cast<std::size_t>(i)]);
      smt_src.push_back(hybrid->smt->source_vocab.encode(src));
      cv.emplace_back(src.size());
    }
    prefix.resize(static_cast<std::size_t>(n));
    prev_att.resize(static_cast<std::size_t>(n));
  }

  Var s = enc.init_state;
  Var c = nmt.initial_context(g, n);
  std::vector<Var> logp(static_cast<std::size_t>(T));
  std::vector<int> y_prev(static_cast<std::size_t>(n)), gold(static_cast<std::size_t>(n));
  for (Index t = 0; t < T; ++t) {
    for (Index i = 0; i < n; ++i) {
      y_prev[static_cast<std::size_t>(i)] = batch.tgt_in_at(i, t);
      gold[static_cast<std::size_t>(i)] = batch.tgt_out_at(i, t);
    }
    StepOut out = nmt.step(g, enc, s, c, y_prev, dropout_rng);
    Var p = out.probs;
    if (hybrid) {
      std::vector<std::vector<smt::Recommendation>> recs(static_cast<std::size_t>(n));
      std::vector<StepVocab> sv(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) {
        const auto r = static_cast<std::size_t>(i);
        if (t >= batch.tgt_lengths[r]) continue;
        recs[r] = smt::recommend(*hybrid->smt, smt_src[r], prefix[r], prev_att[r], cv[r], hybrid->n_rec);
        sv[r] = make_step_vocab(recs[r], *hybrid->bridge);
      }
      p = advisor->fuse(g, out.features, out.probs, sv, hybrid->fixed_gate).probs;
      const Matrix& att = g.value(out.attention);
      for (Index i = 0; i < n; ++i) {
        const auto r = static_cast<std::size_t>(i);
        if (t >= batch.tgt_lengths[r]) continue;
        const auto& tgt = corpus.target.at(batch.pair_index[r]);
        const int smt_gold = t < static_cast<Index>(tgt.size()) ? hybrid->smt->target_vocab.encode(tgt[static_cast<std::size_t>(t)])
                                                                 : Vocabulary::kEos;
        // A gold word outside the NMT vocabulary is emitted as UNK.
        if (gold[r] != Vocabulary::kUnk) smt::update_coverage(cv[r], smt_gold, recs[r]);
        prefix[r].push_back(smt_gold);
        const int len = batch.src_lengths[r];
        prev_att[r].assign(att.row(i).data(), att.row(i).data() + len);
      }
    }
    logp[static_cast<std::size_t>(t)] = g.log(g.pick(p, gold));
    s = out.state;
    c = out.context;
  }
  Var masked = g.mul(g.concat_cols(logp), g.constant(batch.tgt_mask));
  return g.scale_shift(g.sum(masked), -1.0 / static_cast<double>(n), 0.0);
}

double corpus_nll(HybridModel& model, const ParallelCorpus& corpus, std::size_t batch_size,
                  const HybridLossOptions* hybrid) {
  if (corpus.empty()) throw DataError("corpus_nll: empty corpus");
  auto batches = make_batches(corpus, model.src_vocab, model.tgt_vocab, batch_size, 0, nullptr);
  double total = 0.0;
  for (const auto& b : batches) {
    Graph g(false);
    total += g.scalar(nll_loss(g, model, b, corpus, hybrid)) * static_cast<double>(b.size);
  }
  return total / static_cast<double>(corpus.size());
}

std::string EpochLog::to_string() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu, %.6f, %.6f, %.3f", epoch, train_nll, dev_nll, wallclock);
  return buf;
}

namespace {

TrainResult run_epochs(HybridModel model, const ParallelCorpus& train, const ParallelCorpus& dev, const TrainConfig& cfg,
                       std::size_t epochs, const HybridLossOptions* hybrid, std::uint64_t shuffle_stream,
                       std::uint64_t dropout_stream, const EpochCallback& on_epoch) {
  const auto start = std::chrono::steady_clock::now();
  Rng shuffle = Rng::derive(cfg.seed, shuffle_stream);
  Rng drop = Rng::derive(cfg.seed, dropout_stream);
  Adadelta opt(model.params, cfg.rho, cfg.eps);

  TrainResult res;
  res.initial_dev_nll = corpus_nll(model, dev, cfg.batch_size, hybrid);
  res.best_dev_nll = res.initial_dev_nll;
  res.best = model;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    auto batches = make_batches(train, model.src_vocab, model.tgt_vocab, cfg.batch_size, cfg.max_len, &shuffle);
    double total = 0.0;
    std::size_t sentences = 0;
    for (const auto& b : batches) {
      model.params.zero_grad();
      Graph g;
      Var loss = nll_loss(g, model, b, train, hybrid, &drop);
      total += g.scalar(loss) * static_cast<double>(b.size);
      sentences += static_cast<std::size_t>(b.size);
      g.backward(loss);
      opt.step(model.params);
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_nll = total / static_cast<double>(sentences);
    log.dev_nll = corpus_nll(model, dev, cfg.batch_size, hybrid);
    log.wallclock = elapsed(start);
    res.log.push_back(log);
    if (log.dev_nll < res.best_dev_nll) {
      res.best_dev_nll = log.dev_nll;
      res.best_epoch = epoch;
      res.best = model;
    }
    if (on_epoch) on_epoch(log, model);
  }
  return res;
}

}  // namespace

TrainResult pretrain(const ParallelCorpus& train, const ParallelCorpus& dev, const TrainConfig& cfg,
                     const EpochCallback& on_epoch) {
  cfg.validate();
  train.validate();
  dev.validate();
  HybridModel model = HybridModel::create(Vocabulary::build(train.source, cfg.vocab_cap),
                                          Vocabulary::build(train.target, cfg.vocab_cap), cfg.nmt, cfg.seed);
  return run_epochs(std::move(model), train, dev, cfg, cfg.epochs, nullptr, kShuffleStream, kDropoutStream, on_epoch);
}

TrainResult train_hybrid(const ParallelCorpus& train, const ParallelCorpus& dev, const HybridModel& pretrained,
                         const smt::SmtModel& smt, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  train.validate();
  dev.validate();
  if (pretrained.has_advisor()) throw std::invalid_argument("train_hybrid: expected a pre-trained NMT model");
  HybridModel model = pretrained;
  model.seed = cfg.seed;
  model.add_advisor(cfg.advisor);
  const VocabBridge bridge = VocabBridge::build(model.tgt_vocab, smt.target_vocab);
  HybridLossOptions opts{&smt, &bridge, cfg.n_rec, cfg.fixed_gate};
  return run_epochs(std::move(model), train, dev, cfg, cfg.hybrid_epochs, &opts, kHybridShuffleStream,
                    kHybridDropoutStream, on_epoch);
}

}  // namespace hnmt
