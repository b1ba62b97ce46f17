#pragma once

#include "hnmt/tensor.hpp"

#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

namespace hnmt {

class Rng;

namespace ad {

/// Handle to a node of a Graph. Only meaningful together with its graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Tape of executed operations with reverse-mode differentiation.
///
/// Nodes are appended in execution order, so the tape is topologically
/// sorted by construction. backward() walks it once, last to first. A
/// parameter enters the tape at most once; every use of it accumulates
/// into Parameter::grad.
///
/// The operation set is closed: every op below has its own backward rule,
/// and the models are composed only from these.
class Graph {
 public:
  /// With record == false no backward closures are kept (inference).
  explicit Graph(bool record = true);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix m);
  Var param(Parameter& p);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  Index rows(Var v) const { return value(v).rows(); }
  Index cols(Var v) const { return value(v).cols(); }
  /// Gradient accumulated for a node after backward(); zeros if untouched.
  Matrix grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return record_; }

  /// Seeds d loss / d loss = 1 and propagates. loss must be 1x1.
  void backward(Var loss);

  // out = x W + b, with b a 1 x cols row broadcast over rows.
  Var affine(Var x, Var w, Var b);
  Var matmul(Var x, Var w);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var log(Var x);
  // a * x + b elementwise, a and b constants.
  Var scale_shift(Var x, double a, double b);

  Var softmax_rows(Var x);
  /// Softmax restricted to entries with mask != 0; masked entries are 0.
  Var masked_softmax_rows(Var x, const Matrix& mask);
  /// Softmax over consecutive row groups of a k x 1 column.
  Var segment_softmax(Var scores, std::span<const int> segment_sizes);

  Var concat_cols(std::span<const Var> parts);
  Var concat_cols(std::initializer_list<Var> parts) {
    return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
  }
  Var slice_cols(Var x, Index begin, Index count);
  /// out.row(k) = x.row(rows[k]). Serves as embedding lookup.
  Var row_select(Var x, std::span<const int> rows);
  /// Given T steps of n x k, out.row(i * T + j) = steps[j].row(i).
  Var interleave_rows(std::span<const Var> steps);
  Var reshape(Var x, Index rows, Index cols);
  /// weights is n x T, stacked is (n*T) x k; out.row(i) = sum_j w(i,j) stacked.row(i*T+j).
  Var weighted_rows(Var weights, Var stacked);
  /// out.row(i) = x.row(i) * c(i, 0).
  Var scale_rows(Var x, Var c);
  /// out.row(i) = take_a[i] ? a.row(i) : b.row(i).
  Var where_rows(std::span<const char> take_a, Var a, Var b);
  /// out = base; out(rows[k], cols[k]) += values(k, 0).
  Var scatter_add(Var base, Var values, std::span<const int> rows, std::span<const int> cols);
  /// out(i, 0) = x(i, cols[i]).
  Var pick(Var x, std::span<const int> cols);
  Var sum(Var x);
  /// Inverted dropout with a mask drawn from rng.
  Var dropout(Var x, double rate, Rng& rng);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    bool needs_grad = false;
    std::function<void()> backward;
  };

  Var push(const char* op, Matrix value, bool needs_grad, std::function<void()> backward);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  Matrix& grad_ref(Var v);
  const Matrix& out_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  void check(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  bool record_;
  bool backward_done_ = false;
};

}  // namespace ad
}  // namespace hnmt
