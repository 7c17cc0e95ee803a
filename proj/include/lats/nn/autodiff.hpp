#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lats::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable tensor: 2-D value with a gradient slot of the same shape.
struct Tensor {
  std::string name;
  Mat value;
  Mat grad;

  std::vector<std::size_t> shape() const {
    return {static_cast<std::size_t>(value.rows()), static_cast<std::size_t>(value.cols())};
  }
};

class Graph;

/// Handle to a node on a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::uint32_t id) : g_(g), id_(id) {}

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Graph* graph() const { return g_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return g_ != nullptr; }

 private:
  Graph* g_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order; backward walks
/// them in reverse. With gradients disabled, ops only compute values.
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Mat m);
  Var constant(double v);
  /// Leaf bound to a parameter; backward() adds into t.grad.
  Var param(Tensor& t);

  /// Seeds d(root)/d(root) = 1. root must be 1x1.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

  // Op plumbing.
  using BackFn = std::function<void(Graph&, std::uint32_t self)>;
  Var make(Mat value, std::initializer_list<Var> parents, BackFn back);
  Var make(Mat value, const std::vector<Var>& parents, BackFn back);
  const Mat& value(std::uint32_t id) const { return nodes_[id].value; }
  const Mat& grad(std::uint32_t id) const { return nodes_[id].grad; }
  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }
  /// Adds g into the node's gradient (allocating zeros on first use).
  template <typename Expr>
  void accumulate(std::uint32_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    BackFn back;
    Tensor* param = nullptr;
    bool needs_grad = false;
  };
  bool grad_enabled_;
  std::vector<Node> nodes_;
};

// Elementwise / linear algebra. Shapes are checked; mismatches throw ShapeError.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_bias(Var a, Var row);     // row is 1 x cols, broadcast over rows
Var mul_rows(Var a, Var col);     // col is rows x 1, broadcast over columns
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var minimum(Var a, Var b);
Var clip(Var a, double lo, double hi);
Var detach(Var a);

// Reductions and reshaping.
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index n);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
/// Each row repeated k times consecutively: (n x c) -> (n*k x c).
Var repeat_rows(Var a, Eigen::Index k);
/// out[b] = sum_p w(b,p) * x[b*P + p]; w is a constant B x P matrix.
Var segment_sum(Var x, const Mat& w);
/// Picks one column per row: out(i) = a(i, idx[i]).
Var pick(Var a, const std::vector<int>& idx);

/// Row softmax over entries with mask != 0; masked entries are exactly 0.
Var masked_softmax(Var logits, const Mat& mask);
/// Row log-softmax over unmasked entries; masked entries are set to 0.
Var masked_log_softmax(Var logits, const Mat& mask);

}  // namespace lats::nn
