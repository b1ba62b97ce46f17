#include "hnmt/graph.hpp"

#include "hnmt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hnmt::ad {
namespace {

std::string dims(const Matrix& m) { return shape_str(m); }

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw ShapeError(std::string(op) + ": " + detail);
}

}  // namespace

Graph::Graph(bool record) : record_(record) { nodes_.reserve(256); }

void Graph::check(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::invalid_argument("Var does not belong to this graph");
  }
}

Var Graph::push(const char* op, Matrix value, bool needs_grad, std::function<void()> backward) {
  if (!value.allFinite()) throw NumericError(std::string(op) + ": produced a non-finite value");
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad && record_;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Graph::constant(Matrix m) { return push("constant", std::move(m), false, nullptr); }

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
  if (!p.value.allFinite()) throw NumericError("parameter '" + p.name + "' holds a non-finite value");
  Node n;
  n.param = &p;
  n.needs_grad = record_;
  if (record_ && (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())) p.zero_grad();
  nodes_.push_back(std::move(n));
  Var v{static_cast<int>(nodes_.size() - 1)};
  param_nodes_.emplace(&p, v.id);
  return v;
}

const Matrix& Graph::value(Var v) const {
  check(v);
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  return n.param ? n.param->value : n.value;
}

double Graph::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw ShapeError("scalar: expected 1x1, got " + dims(m));
  return m(0, 0);
}

Matrix Graph::grad(Var v) const {
  check(v);
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.param) return n.param->grad;
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix& Graph::grad_ref(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.param) return n.param->grad;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::backward(Var loss) {
  check(loss);
  if (!record_) throw std::logic_error("backward on a graph built without recording");
  if (backward_done_) throw std::logic_error("backward already ran on this graph");
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("backward: loss must be scalar, got " + dims(lv));
  backward_done_ = true;
  if (!needs(loss)) return;
  grad_ref(loss)(0, 0) += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward();
  }
}

Var Graph::affine(Var x, Var w, Var b) {
  const Matrix& X = value(x);
  const Matrix& W = value(w);
  const Matrix& B = value(b);
  require(X.cols() == W.rows(), "affine", "x " + dims(X) + " vs W " + dims(W));
  require(B.rows() == 1 && B.cols() == W.cols(), "affine", "b " + dims(B) + " vs W " + dims(W));
  Matrix out(X.rows(), W.cols());
  out.noalias() = X * W;
  out.rowwise() += B.row(0);
  bool ng = needs(x) || needs(w) || needs(b);
  int o = static_cast<int>(nodes_.size());
  return push("affine", std::move(out), ng, [this, x, w, b, o] {
    const Matrix& g = out_grad(o);
    if (needs(x)) grad_ref(x).noalias() += g * value(w).transpose();
    if (needs(w)) grad_ref(w).noalias() += value(x).transpose() * g;
    if (needs(b)) grad_ref(b) += g.colwise().sum();
  });
}

Var Graph::matmul(Var x, Var w) {
  const Matrix& X = value(x);
  const Matrix& W = value(w);
  require(X.cols() == W.rows(), "matmul", "x " + dims(X) + " vs W " + dims(W));
  Matrix out(X.rows(), W.cols());
  out.noalias() = X * W;
  int o = static_cast<int>(nodes_.size());
  return push("matmul", std::move(out), needs(x) || needs(w), [this, x, w, o] {
    const Matrix& g = out_grad(o);
    if (needs(x)) grad_ref(x).noalias() += g * value(w).transpose();
    if (needs(w)) grad_ref(w).noalias() += value(x).transpose() * g;
  });
}

Var Graph::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "add", dims(A) + " vs " + dims(B));
  int o = static_cast<int>(nodes_.size());
  return push("add", A + B, needs(a) || needs(b), [this, a, b, o] {
    const Matrix& g = out_grad(o);
    if (needs(a)) grad_ref(a) += g;
    if (needs(b)) grad_ref(b) += g;
  });
}

Var Graph::sub(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "sub", dims(A) + " vs " + dims(B));
  int o = static_cast<int>(nodes_.size());
  return push("sub", A - B, needs(a) || needs(b), [this, a, b, o] {
    const Matrix& g = out_grad(o);
    if (needs(a)) grad_ref(a) += g;
    if (needs(b)) grad_ref(b) -= g;
  });
}

Var Graph::mul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "mul", dims(A) + " vs " + dims(B));
  int o = static_cast<int>(nodes_.size());
  return push("mul", A.cwiseProduct(B), needs(a) || needs(b), [this, a, b, o] {
    const Matrix& g = out_grad(o);
    if (needs(a)) grad_ref(a) += g.cwiseProduct(value(b));
    if (needs(b)) grad_ref(b) += g.cwiseProduct(value(a));
  });
}

Var Graph::sigmoid(Var x) {
  Matrix y = value(x).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  int o = static_cast<int>(nodes_.size());
  return push("sigmoid", std::move(y), needs(x), [this, x, o] {
    const Matrix& y = nodes_[static_cast<std::size_t>(o)].value;
    grad_ref(x) += out_grad(o).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
  });
}

Var Graph::tanh(Var x) {
  Matrix y = value(x).array().tanh().matrix();
  int o = static_cast<int>(nodes_.size());
  return push("tanh", std::move(y), needs(x), [this, x, o] {
    const Matrix& y = nodes_[static_cast<std::size_t>(o)].value;
    grad_ref(x).array() += out_grad(o).array() * (1.0 - y.array().square());
  });
}

Var Graph::log(Var x) {
  const Matrix& X = value(x);
  if ((X.array() <= 0.0).any()) throw NumericError("log: non-positive argument");
  int o = static_cast<int>(nodes_.size());
  return push("log", X.array().log().matrix(), needs(x), [this, x, o] {
    grad_ref(x).array() += out_grad(o).array() / value(x).array();
  });
}

Var Graph::scale_shift(Var x, double a, double b) {
  Matrix y = (a * value(x).array() + b).matrix();
  int o = static_cast<int>(nodes_.size());
  return push("scale_shift", std::move(y), needs(x), [this, x, a, o] { grad_ref(x) += a * out_grad(o); });
}

namespace {

// Row softmax over entries where keep(i, j) is true; others are set to 0.
template <typename Keep>
Matrix softmax_impl(const Matrix& x, Keep keep, const char* op) {
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < x.cols(); ++j) {
      if (keep(i, j)) mx = std::max(mx, x(i, j));
    }
    if (!std::isfinite(mx)) throw ShapeError(std::string(op) + ": row " + std::to_string(i) + " fully masked");
    double z = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
      if (keep(i, j)) {
        y(i, j) = std::exp(x(i, j) - mx);
        z += y(i, j);
      }
    }
    y.row(i) /= z;
  }
  return y;
}

}  // namespace

Var Graph::softmax_rows(Var x) {
  require(cols(x) >= 1, "softmax_rows", "needs at least one column");
  Matrix y = softmax_impl(value(x), [](Index, Index) { return true; }, "softmax_rows");
  int o = static_cast<int>(nodes_.size());
  return push("softmax_rows", std::move(y), needs(x), [this, x, o] {
    const Matrix& y = nodes_[static_cast<std::size_t>(o)].value;
    const Matrix& g = out_grad(o);
    Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    grad_ref(x).array() += y.array() * (g.colwise() - dot).array();
  });
}

Var Graph::masked_softmax_rows(Var x, const Matrix& mask) {
  const Matrix& X = value(x);
  require(mask.rows() == X.rows() && mask.cols() == X.cols(), "masked_softmax_rows",
          "mask " + dims(mask) + " vs x " + dims(X));
  Matrix y = softmax_impl(X, [&mask](Index i, Index j) { return mask(i, j) != 0.0; }, "masked_softmax_rows");
  int o = static_cast<int>(nodes_.size());
  return push("masked_softmax_rows", std::move(y), needs(x), [this, x, o] {
    const Matrix& y = nodes_[static_cast<std::size_t>(o)].value;
    const Matrix& g = out_grad(o);
    Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    grad_ref(x).array() += y.array() * (g.colwise() - dot).array();
  });
}

Var Graph::segment_softmax(Var scores, std::span<const int> segment_sizes) {
  const Matrix& S = value(scores);
  require(S.cols() == 1, "segment_softmax", "scores must be a column, got " + dims(S));
  Index total = 0;
  for (int s : segment_sizes) {
    require(s >= 1, "segment_softmax", "empty segment");
    total += s;
  }
  require(total == S.rows(), "segment_softmax",
          "segments cover " + std::to_string(total) + " rows of " + dims(S));
  Matrix y(S.rows(), 1);
  Index start = 0;
  for (int s : segment_sizes) {
    double mx = S.block(start, 0, s, 1).maxCoeff();
    double z = 0.0;
    for (Index k = start; k < start + s; ++k) {
      y(k, 0) = std::exp(S(k, 0) - mx);
      z += y(k, 0);
    }
    for (Index k = start; k < start + s; ++k) y(k, 0) /= z;
    start += s;
  }
  std::vector<int> sizes(segment_sizes.begin(), segment_sizes.end());
  int o = static_cast<int>(nodes_.size());
  return push("segment_softmax", std::move(y), needs(scores), [this, scores, sizes, o] {
    const Matrix& y = nodes_[static_cast<std::size_t>(o)].value;
    const Matrix& g = out_grad(o);
    Matrix& gs = grad_ref(scores);
    Index start = 0;
    for (int s : sizes) {
      double dot = 0.0;
      for (Index k = start; k < start + s; ++k) dot += g(k, 0) * y(k, 0);
      for (Index k = start; k < start + s; ++k) gs(k, 0) += y(k, 0) * (g(k, 0) - dot);
      start += s;
    }
  });
}

Var Graph::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  Index r = rows(parts[0]);
  Index c = 0;
  bool ng = false;
  for (Var p : parts) {
    require(rows(p) == r, "concat_cols", "row mismatch " + dims(value(p)) + " vs " + std::to_string(r));
    c += cols(p);
    ng = ng || needs(p);
  }
  Matrix out(r, c);
  Index off = 0;
  for (Var p : parts) {
    out.middleCols(off, cols(p)) = value(p);
    off += cols(p);
  }
  std::vector<Var> in(parts.begin(), parts.end());
  int o = static_cast<int>(nodes_.size());
  return push("concat_cols", std::move(out), ng, [this, in, o] {
    const Matrix& g = out_grad(o);
    Index off = 0;
    for (Var p : in) {
      Index w = cols(p);
      if (needs(p)) grad_ref(p) += g.middleCols(off, w);
      off += w;
    }
  });
}

Var Graph::slice_cols(Var x, Index begin, Index count) {
  require(begin >= 0 && count >= 1 && begin + count <= cols(x), "slice_cols",
          "range [" + std::to_string(begin) + ", +" + std::to_string(count) + ") of " + dims(value(x)));
  Matrix out = value(x).middleCols(begin, count);
  int o = static_cast<int>(nodes_.size());
  return push("slice_cols", std::move(out), needs(x), [this, x, begin, count, o] {
    grad_ref(x).middleCols(begin, count) += out_grad(o);
  });
}

Var Graph::row_select(Var x, std::span<const int> rows_idx) {
  const Matrix& X = value(x);
  require(!rows_idx.empty(), "row_select", "no rows requested");
  Matrix out(static_cast<Index>(rows_idx.size()), X.cols());
  for (std::size_t k = 0; k < rows_idx.size(); ++k) {
    int r = rows_idx[k];
    require(r >= 0 && r < X.rows(), "row_select", "row " + std::to_string(r) + " out of " + dims(X));
    out.row(static_cast<Index>(k)) = X.row(r);
  }
  std::vector<int> idx(rows_idx.begin(), rows_idx.end());
  int o = static_cast<int>(nodes_.size());
  return push("row_select", std::move(out), needs(x), [this, x, idx, o] {
    const Matrix& g = out_grad(o);
    Matrix& gx = grad_ref(x);
    for (std::size_t k = 0; k < idx.size(); ++k) gx.row(idx[k]) += g.row(static_cast<Index>(k));
  });
}

Var Graph::interleave_rows(std::span<const Var> steps) {
  require(!steps.empty(), "interleave_rows", "no inputs");
  Index n = rows(steps[0]);
  Index k = cols(steps[0]);
  Index T = static_cast<Index>(steps.size());
  bool ng = false;
  for (Var s : steps) {
    require(rows(s) == n && cols(s) == k, "interleave_rows", "step shape " + dims(value(s)));
    ng = ng || needs(s);
  }
  Matrix out(n * T, k);
  for (Index j = 0; j < T; ++j) {
    const Matrix& S = value(steps[static_cast<std::size_t>(j)]);
    for (Index i = 0; i < n; ++i) out.row(i * T + j) = S.row(i);
  }
  std::vector<Var> in(steps.begin(), steps.end());
  int o = static_cast<int>(nodes_.size());
  return push("interleave_rows", std::move(out), ng, [this, in, n, T, o] {
    const Matrix& g = out_grad(o);
    for (Index j = 0; j < T; ++j) {
      Var s = in[static_cast<std::size_t>(j)];
      if (!needs(s)) continue;
      Matrix& gs = grad_ref(s);
      for (Index i = 0; i < n; ++i) gs.row(i) += g.row(i * T + j);
    }
  });
}

Var Graph::reshape(Var x, Index r, Index c) {
  const Matrix& X = value(x);
  require(r * c == X.size(), "reshape", dims(X) + " to [" + std::to_string(r) + "x" + std::to_string(c) + "]");
  Matrix out = Eigen::Map<const Matrix>(X.data(), r, c);
  Index xr = X.rows(), xc = X.cols();
  int o = static_cast<int>(nodes_.size());
  return push("reshape", std::move(out), needs(x), [this, x, xr, xc, o] {
    grad_ref(x) += Eigen::Map<const Matrix>(out_grad(o).data(), xr, xc);
  });
}

Var Graph::weighted_rows(Var weights, Var stacked) {
  const Matrix& W = value(weights);
  const Matrix& H = value(stacked);
  Index n = W.rows(), T = W.cols();
  require(H.rows() == n * T, "weighted_rows", "weights " + dims(W) + " vs stacked " + dims(H));
  Matrix out = Matrix::Zero(n, H.cols());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < T; ++j) out.row(i) += W(i, j) * H.row(i * T + j);
  }
  int o = static_cast<int>(nodes_.size());
  return push("weighted_rows", std::move(out), needs(weights) || needs(stacked), [this, weights, stacked, n, T, o] {
    const Matrix& g = out_grad(o);
    if (needs(weights)) {
      const Matrix& H = value(stacked);
      Matrix& gw = grad_ref(weights);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < T; ++j) gw(i, j) += g.row(i).dot(H.row(i * T + j));
    }
    if (needs(stacked)) {
      const Matrix& W = value(weights);
      Matrix& gh = grad_ref(stacked);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < T; ++j) gh.row(i * T + j) += W(i, j) * g.row(i);
    }
  });
}

Var Graph::scale_rows(Var x, Var c) {
  const Matrix& X = value(x);
  const Matrix& C = value(c);
  require(C.cols() == 1 && C.rows() == X.rows(), "scale_rows", "x " + dims(X) + " vs c " + dims(C));
  Matrix out = X.array().colwise() * C.col(0).array();
  int o = static_cast<int>(nodes_.size());
  return push("scale_rows", std::move(out), needs(x) || needs(c), [this, x, c, o] {
    const Matrix& g = out_grad(o);
    if (needs(x)) grad_ref(x).array() += g.array().colwise() * value(c).col(0).array();
    if (needs(c)) grad_ref(c).col(0) += g.cwiseProduct(value(x)).rowwise().sum();
  });
}

Var Graph::where_rows(std::span<const char> take_a, Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "where_rows", dims(A) + " vs " + dims(B));
  require(static_cast<Index>(take_a.size()) == A.rows(), "where_rows", "mask length mismatch");
  Matrix out(A.rows(), A.cols());
  for (Index i = 0; i < A.rows(); ++i) out.row(i) = take_a[static_cast<std::size_t>(i)] ? A.row(i) : B.row(i);
  std::vector<char> m(take_a.begin(), take_a.end());
  int o = static_cast<int>(nodes_.size());
  return push("where_rows", std::move(out), needs(a) || needs(b), [this, m, a, b, o] {
    const Matrix& g = out_grad(o);
    for (Index i = 0; i < g.rows(); ++i) {
      Var dst = m[static_cast<std::size_t>(i)] ? a : b;
      if (needs(dst)) grad_ref(dst).row(i) += g.row(i);
    }
  });
}

Var Graph::scatter_add(Var base, Var values, std::span<const int> rows_idx, std::span<const int> cols_idx) {
  const Matrix& B = value(base);
  const Matrix& V = value(values);
  require(V.cols() == 1 && static_cast<std::size_t>(V.rows()) == rows_idx.size() && rows_idx.size() == cols_idx.size(),
          "scatter_add", "values " + dims(V) + " vs index lists");
  Matrix out = B;
  for (std::size_t k = 0; k < rows_idx.size(); ++k) {
    require(rows_idx[k] >= 0 && rows_idx[k] < B.rows() && cols_idx[k] >= 0 && cols_idx[k] < B.cols(), "scatter_add",
            "index out of " + dims(B));
    out(rows_idx[k], cols_idx[k]) += V(static_cast<Index>(k), 0);
  }
  std::vector<int> r(rows_idx.begin(), rows_idx.end());
  std::vector<int> c(cols_idx.begin(), cols_idx.end());
  int o = static_cast<int>(nodes_.size());
  return push("scatter_add", std::move(out), needs(base) || needs(values), [this, base, values, r, c, o] {
    const Matrix& g = out_grad(o);
    if (needs(base)) grad_ref(base) += g;
    if (needs(values)) {
      Matrix& gv = grad_ref(values);
      for (std::size_t k = 0; k < r.size(); ++k) gv(static_cast<Index>(k), 0) += g(r[k], c[k]);
    }
  });
}

Var Graph::pick(Var x, std::span<const int> cols_idx) {
  const Matrix& X = value(x);
  require(static_cast<Index>(cols_idx.size()) == X.rows(), "pick", "need one column per row of " + dims(X));
  Matrix out(X.rows(), 1);
  for (Index i = 0; i < X.rows(); ++i) {
    int c = cols_idx[static_cast<std::size_t>(i)];
    require(c >= 0 && c < X.cols(), "pick", "column " + std::to_string(c) + " out of " + dims(X));
    out(i, 0) = X(i, c);
  }
  std::vector<int> idx(cols_idx.begin(), cols_idx.end());
  int o = static_cast<int>(nodes_.size());
  return push("pick", std::move(out), needs(x), [this, x, idx, o] {
    const Matrix& g = out_grad(o);
    Matrix& gx = grad_ref(x);
    for (std::size_t i = 0; i < idx.size(); ++i) gx(static_cast<Index>(i), idx[i]) += g(static_cast<Index>(i), 0);
  });
}

Var Graph::sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = value(x).sum();
  int o = static_cast<int>(nodes_.size());
  return push("sum", std::move(out), needs(x), [this, x, o] { grad_ref(x).array() += out_grad(o)(0, 0); });
}

Var Graph::dropout(Var x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  const Matrix& X = value(x);
  Matrix mask(X.rows(), X.cols());
  const double keep = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < rate ? 0.0 : keep;
  return mul(x, constant(std::move(mask)));
}

}  // namespace hnmt::ad
