#include "hnmt/ibm1.hpp"

#include "hnmt/tensor.hpp"

#include <cmath>
#include <unordered_set>

namespace hnmt::smt {

double TTable::get(int cond, int out) const {
  if (cond < 0 || static_cast<std::size_t>(cond) >= rows_.size()) return 0.0;
  const auto& r = rows_[static_cast<std::size_t>(cond)];
  auto it = r.find(out);
  return it == r.end() ? 0.0 : it->second;
}

void TTable::set(int cond, int out, double p) {
  if (cond < 0) throw std::out_of_range("TTable: negative row");
  if (static_cast<std::size_t>(cond) >= rows_.size()) rows_.resize(static_cast<std::size_t>(cond) + 1);
  rows_[static_cast<std::size_t>(cond)][out] = p;
}

double TTable::row_sum(int cond) const {
  double s = 0.0;
  for (const auto& [k, v] : row(cond)) s += v;
  return s;
}

Ibm1Model train_ibm1(const IdCorpus& src, const IdCorpus& tgt, std::size_t num_src, int iters) {
  if (iters < 1) throw std::invalid_argument("train_ibm1: iters must be >= 1");
  if (src.empty() || src.size() != tgt.size()) throw DataError("train_ibm1: empty or misaligned corpus");
  Ibm1Model m;
  m.null_id = static_cast<int>(num_src);
  m.table = TTable(num_src + 1);

  std::unordered_set<int> targets;
  for (const auto& t : tgt) targets.insert(t.begin(), t.end());
  const double init = 1.0 / static_cast<double>(targets.size());
  for (std::size_t s = 0; s < src.size(); ++s) {
    for (int y : tgt[s]) {
      m.table.set(m.null_id, y, init);
      for (int x : src[s]) m.table.set(x, y, init);
    }
  }

  std::vector<double> posterior;
  for (int it = 0; it < iters; ++it) {
    std::vector<std::unordered_map<int, double>> counts(num_src + 1);
    std::vector<double> totals(num_src + 1, 0.0);
    double ll = 0.0;
    for (std::size_t s = 0; s < src.size(); ++s) {
      const auto& xs = src[s];
      const double norm = 1.0 / static_cast<double>(xs.size() + 1);
      for (int y : tgt[s]) {
        double denom = m.table.get(m.null_id, y);
        for (int x : xs) denom += m.table.get(x, y);
        ll += std::log(denom * norm);
        double pn = m.table.get(m.null_id, y) / denom;
        counts[static_cast<std::size_t>(m.null_id)][y] += pn;
        totals[static_cast<std::size_t>(m.null_id)] += pn;
        for (int x : xs) {
          double p = m.table.get(x, y) / denom;
          counts[static_cast<std::size_t>(x)][y] += p;
          totals[static_cast<std::size_t>(x)] += p;
        }
      }
    }
    m.log_likelihood.push_back(ll);
    TTable next(num_src + 1);
    for (std::size_t x = 0; x < counts.size(); ++x) {
      for (const auto& [y, c] : counts[x]) next.set(static_cast<int>(x), y, c / totals[x]);
    }
    m.table = std::move(next);
  }
  return m;
}

std::vector<int> viterbi_align(const Ibm1Model& model, std::span<const int> src, std::span<const int> tgt) {
  std::vector<int> out;
  out.reserve(tgt.size());
  for (int y : tgt) {
    int best = -1;
    double best_p = 0.0;
    for (std::size_t j = 0; j < src.size(); ++j) {
      double p = model.table.get(src[j], y);
      if (best < 0 || p > best_p) {
        best = static_cast<int>(j);
        best_p = p;
      }
    }
    if (model.table.get(model.null_id, y) > best_p) best = -1;
    out.push_back(best);
  }
  return out;
}

}  // namespace hnmt::smt
