#pragma once

#include "hnmt/advisor.hpp"
#include "hnmt/corpus.hpp"
#include "hnmt/graph.hpp"
#include "hnmt/hybrid.hpp"
#include "hnmt/smt_model.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hnmt {

/// Flat key=value run configuration shared by every pipeline stage.
struct TrainConfig {
  std::string phase = "pretrain";  // pretrain | hybrid
  std::uint64_t seed = 1;
  std::size_t vocab_cap = 200;
  std::size_t batch_size = 16;
  std::size_t max_len = 50;
  std::size_t epochs = 10;
  std::size_t hybrid_epochs = 5;
  std::size_t checkpoint_every = 0;  // epochs; 0 keeps only the best model

  NmtConfig nmt;
  AdvisorConfig advisor;

  std::size_t n_tm = 5;
  std::size_t n_rec = 25;
  int ibm_iters = 10;
  int lm_order = 4;
  double lm_floor = 0.01;
  smt::FeatureWeights weights;

  double rho = 0.95;
  double eps = 1e-6;

  std::size_t beam = 10;
  std::optional<double> fixed_gate;
  bool pseudo_recs = false;

  void validate() const;
  /// Unknown keys and malformed values throw std::invalid_argument.
  void set(const std::string& key, const std::string& value);
  static TrainConfig parse(std::string_view text);
  static TrainConfig load(const std::filesystem::path& path);
  /// Every key in a fixed order, one "key=value" per line.
  std::string to_string() const;
  std::map<std::string, std::string> to_map() const;

  smt::SmtOptions smt_options() const;
};

/// Per-parameter Adadelta accumulators.
class Adadelta {
 public:
  Adadelta(const ParameterSet& params, double rho = 0.95, double eps = 1e-6);

  /// x += -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g, with both averages
  /// decayed by rho. Uses Parameter::grad as g.
  void step(ParameterSet& params);

  const std::vector<Matrix>& eg2() const { return eg2_; }
  const std::vector<Matrix>& edx2() const { return edx2_; }

 private:
  double rho_;
  double eps_;
  std::vector<Matrix> eg2_;
  std::vector<Matrix> edx2_;
};

/// SMT side of the hybrid loss.
struct HybridLossOptions {
  const smt::SmtModel* smt = nullptr;
  const VocabBridge* bridge = nullptr;
  std::size_t n_rec = 25;
  std::optional<double> fixed_gate;
};

/// Teacher-forced mean over sentences of the summed token NLL. With hybrid
/// options the fused distribution is scored and SMT coverage follows the gold
/// tokens; otherwise only the NMT part runs.
ad::Var nll_loss(ad::Graph& g, HybridModel& model, const Batch& batch, const ParallelCorpus& corpus,
                 const HybridLossOptions* hybrid = nullptr, Rng* dropout_rng = nullptr);

/// Mean sentence NLL over a corpus, without recording gradients.
double corpus_nll(HybridModel& model, const ParallelCorpus& corpus, std::size_t batch_size,
                  const HybridLossOptions* hybrid = nullptr);

struct EpochLog {
  std::size_t epoch = 0;
  double train_nll = 0.0;
  double dev_nll = 0.0;
  double wallclock = 0.0;  // seconds since training started

  std::string to_string() const;
};

struct TrainResult {
  HybridModel best;
  double initial_dev_nll = 0.0;
  double best_dev_nll = 0.0;
  std::size_t best_epoch = 0;  // 0: the initial parameters were never beaten
  std::vector<EpochLog> log;
};

/// Called after each epoch with the current (not necessarily best) model.
using EpochCallback = std::function<void(const EpochLog&, const HybridModel&)>;

/// NMT-only training from a fresh seeded initialization. Vocabularies are
/// built from train with cfg.vocab_cap.
TrainResult pretrain(const ParallelCorpus& train, const ParallelCorpus& dev, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = nullptr);

/// Joint training of every parameter, starting from a pre-trained NMT model
/// with freshly initialized classifier and gate.
TrainResult train_hybrid(const ParallelCorpus& train, const ParallelCorpus& dev, const HybridModel& pretrained,
                         const smt::SmtModel& smt, const TrainConfig& cfg, const EpochCallback& on_epoch = nullptr);

}  // namespace hnmt
