#include "hnmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hnmt::ad {
namespace {

double evaluate(const LossBuilder& loss) {
  Graph g(false);
  double v = g.scalar(loss(g));
  if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite loss evaluation");
  return v;
}

}  // namespace

std::vector<Matrix> analytic_gradients(const LossBuilder& loss, std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
  Graph g;
  Var l = loss(g);
  g.backward(l);
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (Parameter* p : params) out.push_back(p->grad);
  return out;
}

std::vector<Matrix> numeric_gradients(const LossBuilder& loss, std::span<Parameter* const> params, double h,
                                      Stencil stencil) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (Parameter* p : params) {
    Matrix g(p->value.rows(), p->value.cols());
    for (Index i = 0; i < p->value.size(); ++i) {
      double& w = p->value.data()[i];
      const double saved = w;
      auto at = [&](double offset) {
        w = saved + offset;
        const double v = evaluate(loss);
        w = saved;
        return v;
      };
      if (stencil == Stencil::kCentral) {
        g.data()[i] = (at(h) - at(-h)) / (2.0 * h);
      } else {
        g.data()[i] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12.0 * h);
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

GradCheckReport compare_gradients(std::span<Parameter* const> params, const std::vector<Matrix>& analytic,
                                  const std::vector<Matrix>& numeric, double tol) {
  GradCheckReport r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Matrix& a = analytic.at(k);
    const Matrix& n = numeric.at(k);
    if (a.rows() != n.rows() || a.cols() != n.cols()) throw ShapeError("compare_gradients: shape mismatch");
    for (Index i = 0; i < a.size(); ++i) {
      const double ga = a.data()[i];
      const double gn = n.data()[i];
      const double err = std::abs(ga - gn) / std::max({std::abs(ga), std::abs(gn), 1e-8});
      ++r.coords_checked;
      if (r.worst_index < 0 || err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_param = params[k]->name;
        r.worst_index = i;
        r.worst_analytic = ga;
        r.worst_numeric = gn;
      }
    }
  }
  r.passed = r.max_rel_error <= tol;
  return r;
}

GradCheckReport finite_diff_check(const LossBuilder& loss, std::span<Parameter* const> params, double h, double tol,
                                  Stencil stencil) {
  auto a = analytic_gradients(loss, params);
  auto n = numeric_gradients(loss, params, h, stencil);
  return compare_gradients(params, a, n, tol);
}

GradCheckReport finite_diff_check(const LossBuilder& loss, ParameterSet& params, double h, double tol,
                                  Stencil stencil) {
  std::vector<Parameter*> ps;
  for (auto& p : params) ps.push_back(p.get());
  return finite_diff_check(loss, ps, h, tol, stencil);
}

std::string to_string(const GradCheckReport& r) {
  std::ostringstream os;
  os << (r.passed ? "PASS" : "FAIL") << " max_rel_error=" << r.max_rel_error << " coords=" << r.coords_checked;
  if (r.worst_index >= 0) {
    os << " worst=" << r.worst_param << "[" << r.worst_index << "] analytic=" << r.worst_analytic
       << " numeric=" << r.worst_numeric;
  }
  return os.str();
}

}  // namespace hnmt::ad
