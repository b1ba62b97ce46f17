#pragma once

#include "hnmt/graph.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hnmt::ad {

/// Builds a scalar loss on the given graph from the current parameter values.
using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
};

/// Gradients from one recorded forward + backward pass.
std::vector<Matrix> analytic_gradients(const LossBuilder& loss, std::span<Parameter* const> params);

enum class Stencil {
  kCentral,     // (f(w+h) - f(w-h)) / 2h
  kFivePoint,   // (-f(w+2h) + 8f(w+h) - 8f(w-h) + f(w-2h)) / 12h, error O(h^4)
};

/// Finite-difference gradient, one coordinate at a time.
/// Throws NumericError if any evaluation is non-finite.
std::vector<Matrix> numeric_gradients(const LossBuilder& loss, std::span<Parameter* const> params, double h,
                                      Stencil stencil = Stencil::kCentral);

/// Per-coordinate relative error |a - n| / max(|a|, |n|, 1e-8); passes iff the max is <= tol.
GradCheckReport compare_gradients(std::span<Parameter* const> params, const std::vector<Matrix>& analytic,
                                  const std::vector<Matrix>& numeric, double tol);

GradCheckReport finite_diff_check(const LossBuilder& loss, std::span<Parameter* const> params, double h, double tol,
                                  Stencil stencil = Stencil::kCentral);
GradCheckReport finite_diff_check(const LossBuilder& loss, ParameterSet& params, double h, double tol,
                                  Stencil stencil = Stencil::kCentral);

std::string to_string(const GradCheckReport& r);

}  // namespace hnmt::ad
