#pragma once

#include "hnmt/checkpoint.hpp"
#include "hnmt/corpus.hpp"
#include "hnmt/lex_tables.hpp"
#include "hnmt/ngram_lm.hpp"
#include "hnmt/rng.hpp"
#include "hnmt/vocab.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace hnmt::smt {

enum Feature : int { kFwdTrans = 0, kBwdTrans, kFwdLex, kBwdLex, kLm, kReorder, kNumFeatures };

/// Log-linear weights of the six recommendation features.
struct FeatureWeights {
  std::array<double, kNumFeatures> lambda = {1.0, 1.0, 1.0, 1.0, 1.0, 10.0};

  double operator[](int f) const { return lambda[static_cast<std::size_t>(f)]; }
};

/// Content-word filter applied to recommendations.
class StopList {
 public:
  StopList() = default;
  explicit StopList(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  /// English function words and punctuation; numerals are not included.
  static StopList english_default();
  static StopList load(const std::filesystem::path& path);
  static StopList parse(std::string_view text);
  std::string serialize() const;

  bool contains(std::string_view w) const { return words_.count(std::string(w)) != 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

/// Distance reordering cost -|sp_t - sp_prev - 1|.
double reorder_cost_hard(int sp_t, int sp_prev);
/// Attention-expected reordering cost -sum_j a_prev[j] |sp_t - j - 1|,
/// positions 0-based. Throws if a_prev does not sum to 1 within 1e-6.
double reorder_cost_soft(int sp_t, std::span<const double> a_prev);

class CoverageVector {
 public:
  CoverageVector() = default;
  explicit CoverageVector(std::size_t n) : bits_(n, 0) {}

  std::size_t size() const { return bits_.size(); }
  bool covered(std::size_t i) const { return bits_.at(i) != 0; }
  void set(std::size_t i) { bits_.at(i) = 1; }
  std::size_t count() const;
  bool all() const { return count() == size(); }
  std::string to_string() const;

  bool operator==(const CoverageVector&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct Candidate {
  int word = 0;
  double rank_score = 0.0;
  std::array<double, 4> log_probs{};
};

struct Recommendation {
  int word = 0;
  int src_pos = 0;
  std::array<double, kNumFeatures> features{};
  double score = 0.0;
};

enum class LmKind { kUnkMapped, kOriginal };

struct SmtOptions {
  int ibm_iters = 10;
  NGramLM::Options lm;
  FeatureWeights weights;
  std::size_t n_tm = 5;
};

/// Word-level SMT advisor. Source and target vocabularies are uncapped; the
/// UNK-mapped LM sees the NMT target vocabulary, the original LM sees all words.
struct SmtModel {
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  LexTables tables;
  NGramLM unk_lm;
  NGramLM full_lm;
  StopList stop;
  FeatureWeights weights;
  std::size_t n_tm = 5;

  // Derived by finalize().
  std::vector<std::vector<Candidate>> candidates;  // per source id
  std::vector<int> unk_lm_ids;                     // per target id
  std::vector<int> full_lm_ids;                    // per target id
  std::vector<char> is_stop;                       // per target id
  std::vector<int> frequent;                       // most frequent non-stop target ids

  /// Rebuilds the candidate table and id maps.
  void finalize();

  const NGramLM& lm(LmKind kind) const { return kind == LmKind::kOriginal ? full_lm : unk_lm; }
  std::span<const int> lm_ids(LmKind kind) const { return kind == LmKind::kOriginal ? full_lm_ids : unk_lm_ids; }

  Container to_container() const;
  static SmtModel from_container(const Container& c);
};

/// Top n_tm targets per source word ranked by the weighted sum of the four
/// translation probabilities (ties by target spelling).
std::vector<std::vector<Candidate>> build_candidate_table(const LexTables& tables, const Vocabulary& src_vocab,
                                                          const Vocabulary& tgt_vocab, const FeatureWeights& w,
                                                          std::size_t n_tm);

SmtModel train_smt(const ParallelCorpus& corpus, const Vocabulary& nmt_target_vocab, StopList stop,
                   const SmtOptions& options);

/// Scored recommendations for the next target word.
///
/// src and prefix are ids in the SMT vocabularies. prev_attention is the
/// decoder attention of the previous step (empty at the first step, where the
/// reordering feature is 0). Returns at most n_rec entries sorted by score,
/// then src_pos ascending, then target spelling.
std::vector<Recommendation> recommend(const SmtModel& model, std::span<const int> src, std::span<const int> prefix,
                                      std::span<const double> prev_attention, const CoverageVector& cv,
                                      std::size_t n_rec, LmKind lm = LmKind::kUnkMapped);

/// Random stand-ins for recommend(): n_rec words drawn without replacement
/// from the 50 most frequent non-stop target words, each attached to a
/// random uncovered source position. Scores are 0.
std::vector<Recommendation> pseudo_recommend(const SmtModel& model, const CoverageVector& cv, std::size_t n_rec,
                                             Rng& rng);

/// Marks the source position of the best recommendation that produced
/// `emitted` (an SMT target id). UNK emissions never update coverage.
void update_coverage(CoverageVector& cv, int emitted, std::span<const Recommendation> recs);

/// Orders recommendations by the declared tie-break.
bool rec_before(const Recommendation& a, const Recommendation& b, const Vocabulary& tgt_vocab);

void save_smt(const SmtModel& model, const std::filesystem::path& dir);
SmtModel load_smt(const std::filesystem::path& dir);

}  // namespace hnmt::smt
