#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace hnmt::smt {

/// Sparse conditional table p(out | cond), one row per conditioning id.
class TTable {
 public:
  TTable() = default;
  explicit TTable(std::size_t rows) : rows_(rows) {}

  double get(int cond, int out) const;
  void set(int cond, int out, double p);
  const std::unordered_map<int, double>& row(int cond) const { return rows_.at(static_cast<std::size_t>(cond)); }
  std::size_t num_rows() const { return rows_.size(); }
  void resize(std::size_t rows) { rows_.resize(rows); }
  double row_sum(int cond) const;

 private:
  std::vector<std::unordered_map<int, double>> rows_;
};

/// IBM Model 1 t-table t(tgt | src) with a NULL source word at row null_id().
struct Ibm1Model {
  TTable table;
  int null_id = 0;
  /// Corpus log-likelihood under the parameters entering each iteration.
  std::vector<double> log_likelihood;
};

using IdCorpus = std::vector<std::vector<int>>;

/// EM for IBM Model 1. src ids are < num_src; the NULL word gets id num_src.
Ibm1Model train_ibm1(const IdCorpus& src, const IdCorpus& tgt, std::size_t num_src, int iters);

/// Viterbi alignment under an IBM1 table: for each target position, the
/// source position with the highest t (first one on ties), or -1 when NULL
/// scores strictly higher than every source word.
std::vector<int> viterbi_align(const Ibm1Model& model, std::span<const int> src, std::span<const int> tgt);

}  // namespace hnmt::smt
