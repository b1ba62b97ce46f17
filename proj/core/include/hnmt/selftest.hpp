#pragma once

#include "hnmt/advisor.hpp"
#include "hnmt/corpus.hpp"
#include "hnmt/gradcheck.hpp"
#include "hnmt/hybrid.hpp"
#include "hnmt/smt_model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hnmt {

/// A tiny hybrid model, its SMT tables and a two-sentence batch whose
/// sentences differ in length. Every candidate is recommended (n_rec is
/// large), so the loss is smooth in every parameter.
struct GradientFixture {
  ParallelCorpus corpus;
  HybridModel model;
  smt::SmtModel smt;
  VocabBridge bridge;
  Batch batch;
  std::size_t n_rec = 1000;
};

GradientFixture make_gradient_fixture(std::uint64_t seed);

/// Finite-difference check of the complete hybrid loss. Some coordinates
/// have gradients near 1e-9, below what a central difference resolves in
/// double precision, hence the five-point stencil with a wider step.
ad::GradCheckReport check_hybrid_gradients(std::uint64_t seed, double h = 1e-3, double tol = 1e-4,
                                           ad::Stencil stencil = ad::Stencil::kFivePoint);

/// Names of the graph operations covered by check_op_gradients.
const std::vector<std::string>& checked_ops();
/// Finite-difference check of one operation on random small shapes.
ad::GradCheckReport check_op_gradients(const std::string& op, std::uint64_t seed, double h = 1e-5, double tol = 1e-4);

struct SelftestEntry {
  std::string name;
  ad::GradCheckReport report;
};

/// Every op on `seeds` seeds plus the hybrid loss on `hybrid_seeds` seeds.
std::vector<SelftestEntry> run_selftest(std::size_t seeds, std::size_t hybrid_seeds);

}  // namespace hnmt
