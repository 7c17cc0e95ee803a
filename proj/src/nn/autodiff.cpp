#include "lats/nn/autodiff.hpp"

#include <cmath>
#include <limits>

#include "lats/common/errors.hpp"

namespace lats::nn {

namespace {

std::string shape_str(const Mat& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
                     shape_str(b.value()));
  }
}

Graph& graph_of(const Var& a) {
  if (!a.valid()) throw ShapeError("operation on an empty Var");
  return *a.graph();
}

}  // namespace

const Mat& Var::value() const { return g_->value(id_); }

Var Graph::constant(Mat m) {
  nodes_.push_back(Node{std::move(m), {}, {}, nullptr, false});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::constant(double v) { return constant(Mat::Constant(1, 1, v)); }

Var Graph::param(Tensor& t) {
  nodes_.push_back(Node{t.value, {}, {}, &t, grad_enabled_});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::make(Mat value, std::initializer_list<Var> parents, BackFn back) {
  return make(std::move(value), std::vector<Var>(parents), std::move(back));
}

Var Graph::make(Mat value, const std::vector<Var>& parents, BackFn back) {
  bool needs = false;
  if (grad_enabled_) {
    for (const Var& p : parents) needs = needs || nodes_[p.id()].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(back) : BackFn{}, nullptr, needs});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Graph::backward(Var root) {
  if (!grad_enabled_) throw ShapeError("backward on a graph without gradients");
  if (root.rows() != 1 || root.cols() != 1) throw ShapeError("backward root must be 1x1");
  if (!nodes_[root.id()].needs_grad) return;
  nodes_[root.id()].grad = Mat::Ones(1, 1);
  for (std::size_t k = root.id() + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (n.grad.size() == 0) continue;
    if (n.back) n.back(*this, static_cast<std::uint32_t>(k));
    if (n.param) {
      Tensor& t = *n.param;
      if (t.grad.size() == 0) t.grad = Mat::Zero(t.value.rows(), t.value.cols());
      t.grad += n.grad;
    }
  }
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  }
  Mat out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  const auto ia = a.id(), ib = b.id();
  return graph_of(a).make(std::move(out), {a, b}, [ia, ib](Graph& g, std::uint32_t s) {
    const Mat& go = g.grad(s);
    if (g.needs_grad(ia)) g.accumulate(ia, Mat(go * g.value(ib).transpose()));
    if (g.needs_grad(ib)) g.accumulate(ib, Mat(g.value(ia).transpose() * go));
  });
}

Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_str(a.value()) + " * " + shape_str(b.value()) + "^T");
  }
  Mat out(a.rows(), b.rows());
  out.noalias() = a.value() * b.value().transpose();
  const auto ia = a.id(), ib = b.id();
  return graph_of(a).make(std::move(out), {a, b}, [ia, ib](Graph& g, std::uint32_t s) {
    const Mat& go = g.grad(s);
    if (g.needs_grad(ia)) g.accumulate(ia, Mat(go * g.value(ib)));
    if (g.needs_grad(ib)) g.accumulate(ib, Mat(go.transpose() * g.value(ia)));
  });
}

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  const auto ia = a.id(), ib = b.id();
  return graph_of(a).make(a.value() + b.value(), {a, b}, [ia, ib](Graph& g, std::uint32_t s) {
    g.accumulate(ia, g.grad(s));
    g.accumulate(ib, g.grad(s));
  });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  const auto ia = a.id(), ib = b.id();
  return graph_of(a).make(a.value() - b.value(), {a, b}, [ia, ib](Graph& g, std::uint32_t s) {
    g.accumulate(ia, g.grad(s));
    g.accumulate(ib, Mat(-g.grad(s)));
  });
}

Var mul(Var a, Var b) {
  same_shape(a, b, "mul");
  const auto ia = a.id(), ib = b.id();
  return graph_of(a).make(a.value().cwiseProduct(b.value()), {a, b},
                          [ia, ib](Graph& g, std::uint32_t s) {
                            const Mat& go = g.grad(s);
                            if (g.needs_grad(ia)) g.accumulate(ia, Mat(go.cwiseProduct(g.value(ib))));
                            if (g.needs_grad(ib)) g.accumulate(ib, Mat(go.cwiseProduct(g.value(ia))));
                          });
}

Var add_bias(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_bias: " + shape_str(a.value()) + " + " + shape_str(row.value()));
  }
  Mat out = a.value();
  out.rowwise() += row.value().row(0);
  const auto ia = a.id(), ib = row.id();
  return graph_of(a).make(std::move(out), {a, row}, [ia, ib](Graph& g, std::uint32_t s) {
    g.accumulate(ia, g.grad(s));
    if (g.needs_grad(ib)) g.accumulate(ib, Mat(g.grad(s).colwise().sum()));
  });
}

Var mul_rows(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw ShapeError("mul_rows: " + shape_str(a.value()) + " * " + shape_str(col.value()));
  }
  Mat out = a.value().array().colwise() * col.value().col(0).array();
  const auto ia = a.id(), ic = col.id();
  return graph_of(a).make(std::move(out), {a, col}, [ia, ic](Graph& g, std::uint32_t s) {
    const Mat& go = g.grad(s);
    if (g.needs_grad(ia)) {
      g.accumulate(ia, Mat(go.array().colwise() * g.value(ic).col(0).array()));
    }
    if (g.needs_grad(ic)) g.accumulate(ic, Mat(go.cwiseProduct(g.value(ia)).rowwise().sum()));
  });
}

Var scale(Var a, double k) {
  const auto ia = a.id();
  return graph_of(a).make(a.value() * k, {a}, [ia, k](Graph& g, std::uint32_t s) {
    g.accumulate(ia, Mat(g.grad(s) * k));
  });
}

Var add_scalar(Var a, double k) {
  const auto ia = a.id();
  return graph_of(a).make(Mat(a.value().array() + k), {a},
                          [ia](Graph& g, std::uint32_t s) { g.accumulate(ia, g.grad(s)); });
}

Var tanh(Var a) {
  const auto ia = a.id();
  return graph_of(a).make(Mat(a.value().array().tanh()), {a}, [ia](Graph& g, std::uint32_t s) {
    const Mat& y = g.value(s);
    g.accumulate(ia, Mat(g.grad(s).array() * (1.0 - y.array().square())));
  });
}

Var sigmoid(Var a) {
  const auto ia = a.id();
  Mat y = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  return graph_of(a).make(std::move(y), {a}, [ia](Graph& g, std::uint32_t s) {
    const Mat& y = g.value(s);
    g.accumulate(ia, Mat(g.grad(s).array() * y.array() * (1.0 - y.array())));
  });
}

Var relu(Var a) {
  const auto ia = a.id();
  return graph_of(a).make(Mat(a.value().cwiseMax(0.0)), {a}, [ia](Graph& g, std::uint32_t s) {
    g.accumulate(ia, Mat((g.value(ia).array() > 0.0).select(g.grad(s), 0.0)));
  });
}

Var exp(Var a) {
  const auto ia = a.id();
  return graph_of(a).make(Mat(a.value().array().exp()), {a}, [ia](Graph& g, std::uint32_t s) {
    g.accumulate(ia, Mat(g.grad(s).cwiseProduct(g.value(s))));
  });
}

Var log(Var a) {
  const auto ia = a.id();
  return graph_of(a).make(Mat(a.value().array().log()), {a}, [ia](Graph& g, std::uint32_t s) {
    g.accumulate(ia, Mat(g.grad(s).array() / g.value(ia).array()));
  });
}

Var square(Var a) {
  const auto ia = a.id();
  return graph_of(a).make(Mat(a.value().array().square()), {a}, [ia](Graph& g, std::uint32_t s) {
    g.accumulate(ia, Mat(2.0 * g.grad(s).array() * g.value(ia).array()));
  });
}

Var minimum(Var a, Var b) {
  same_shape(a, b, "minimum");
  const auto ia = a.id(), ib = b.id();
  return graph_of(a).make(a.value().cwiseMin(b.value()), {a, b}, [ia, ib](Graph& g, std::uint32_t s) {
    const auto take_a = (g.value(ia).array() <= g.value(ib).array());
    g.accumulate(ia, Mat(take_a.select(g.grad(s), 0.0)));
    g.accumulate(ib, Mat(take_a.select(0.0, g.grad(s))));
  });
}

Var clip(Var a, double lo, double hi) {
  const auto ia = a.id();
  return graph_of(a).make(Mat(a.value().cwiseMax(lo).cwiseMin(hi)), {a},
                          [ia, lo, hi](Graph& g, std::uint32_t s) {
                            const auto& x = g.value(ia).array();
                            g.accumulate(ia, Mat((x > lo && x < hi).select(g.grad(s), 0.0)));
                          });
}

Var detach(Var a) { return graph_of(a).constant(a.value()); }

Var sum(Var a) {
  const auto ia = a.id();
  const auto r = a.rows(), c = a.cols();
  return graph_of(a).make(Mat::Constant(1, 1, a.value().sum()), {a},
                          [ia, r, c](Graph& g, std::uint32_t s) {
                            g.accumulate(ia, Mat::Constant(r, c, g.grad(s)(0, 0)));
                          });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var row_sum(Var a) {
  const auto ia = a.id();
  const auto c = a.cols();
  return graph_of(a).make(Mat(a.value().rowwise().sum()), {a}, [ia, c](Graph& g, std::uint32_t s) {
    g.accumulate(ia, Mat(g.grad(s).replicate(1, c)));
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const Eigen::Index r = parts[0].rows();
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    if (p.rows() != r) throw ShapeError("concat_cols: row mismatch");
    c += p.cols();
  }
  Mat out(r, c);
  std::vector<std::uint32_t> ids;
  std::vector<Eigen::Index> widths;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  return graph_of(parts[0]).make(std::move(out), parts, [ids, widths](Graph& g, std::uint32_t s) {
    Eigen::Index o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (g.needs_grad(ids[k])) g.accumulate(ids[k], Mat(g.grad(s).middleCols(o, widths[k])));
      o += widths[k];
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.cols()) throw ShapeError("slice_cols out of range");
  const auto ia = a.id();
  const auto r = a.rows(), c = a.cols();
  return graph_of(a).make(Mat(a.value().middleCols(start, n)), {a},
                          [ia, r, c, start, n](Graph& g, std::uint32_t s) {
                            Mat full = Mat::Zero(r, c);
                            full.middleCols(start, n) = g.grad(s);
                            g.accumulate(ia, full);
                          });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw ShapeError("reshape: element count mismatch");
  const auto ia = a.id();
  const auto r = a.rows(), c = a.cols();
  Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  return graph_of(a).make(std::move(out), {a}, [ia, r, c](Graph& g, std::uint32_t s) {
    g.accumulate(ia, Mat(Eigen::Map<const Mat>(g.grad(s).data(), r, c)));
  });
}

Var repeat_rows(Var a, Eigen::Index k) {
  if (k < 1) throw ShapeError("repeat_rows: k must be positive");
  const auto ia = a.id();
  const auto n = a.rows(), c = a.cols();
  Mat out(n * k, c);
  for (Eigen::Index i = 0; i < n; ++i) out.middleRows(i * k, k) = a.value().row(i).replicate(k, 1);
  return graph_of(a).make(std::move(out), {a}, [ia, n, c, k](Graph& g, std::uint32_t s) {
    Mat d(n, c);
    const Mat& go = g.grad(s);
    for (Eigen::Index i = 0; i < n; ++i) d.row(i) = go.middleRows(i * k, k).colwise().sum();
    g.accumulate(ia, d);
  });
}

Var segment_sum(Var x, const Mat& w) {
  const Eigen::Index B = w.rows(), P = w.cols();
  if (x.rows() != B * P) throw ShapeError("segment_sum: rows must equal B*P");
  const auto ix = x.id();
  const auto c = x.cols();
  Mat out = Mat::Zero(B, c);
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index p = 0; p < P; ++p)
      if (w(b, p) != 0.0) out.row(b) += w(b, p) * x.value().row(b * P + p);
  return graph_of(x).make(std::move(out), {x}, [ix, w, B, P, c](Graph& g, std::uint32_t s) {
    Mat d = Mat::Zero(B * P, c);
    const Mat& go = g.grad(s);
    for (Eigen::Index b = 0; b < B; ++b)
      for (Eigen::Index p = 0; p < P; ++p)
        if (w(b, p) != 0.0) d.row(b * P + p) = w(b, p) * go.row(b);
    g.accumulate(ix, d);
  });
}

Var pick(Var a, const std::vector<int>& idx) {
  if (static_cast<Eigen::Index>(idx.size()) != a.rows()) throw ShapeError("pick: index count mismatch");
  Mat out(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (idx[i] < 0 || idx[i] >= a.cols()) throw ShapeError("pick: index out of range");
    out(i, 0) = a.value()(i, idx[i]);
  }
  const auto ia = a.id();
  const auto r = a.rows(), c = a.cols();
  return graph_of(a).make(std::move(out), {a}, [ia, idx, r, c](Graph& g, std::uint32_t s) {
    Mat d = Mat::Zero(r, c);
    for (Eigen::Index i = 0; i < r; ++i) d(i, idx[i]) = g.grad(s)(i, 0);
    g.accumulate(ia, d);
  });
}

namespace {

void check_mask(const Var& x, const Mat& mask, const char* op) {
  if (mask.rows() != x.rows() || mask.cols() != x.cols()) throw ShapeError(std::string(op) + ": mask shape");
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    if ((mask.row(i).array() != 0.0).count() == 0) throw ShapeError(std::string(op) + ": row fully masked");
  }
}

}  // namespace

Var masked_softmax(Var logits, const Mat& mask) {
  check_mask(logits, mask, "masked_softmax");
  const Mat& x = logits.value();
  Mat y = Mat::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) mx = std::max(mx, x(i, j));
    double z = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) z += (y(i, j) = std::exp(x(i, j) - mx));
    for (Eigen::Index j = 0; j < x.cols(); ++j) y(i, j) /= z;
  }
  const auto il = logits.id();
  return graph_of(logits).make(std::move(y), {logits}, [il](Graph& g, std::uint32_t s) {
    const Mat& y = g.value(s);
    const Mat& go = g.grad(s);
    Mat inner = go.cwiseProduct(y).rowwise().sum();
    Mat d = y.array() * (go.array() - inner.replicate(1, y.cols()).array());
    g.accumulate(il, d);
  });
}

Var masked_log_softmax(Var logits, const Mat& mask) {
  check_mask(logits, mask, "masked_log_softmax");
  const Mat& x = logits.value();
  Mat y = Mat::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) mx = std::max(mx, x(i, j));
    double z = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) z += std::exp(x(i, j) - mx);
    const double lse = mx + std::log(z);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) y(i, j) = x(i, j) - lse;
  }
  const auto il = logits.id();
  return graph_of(logits).make(std::move(y), {logits}, [il, mask](Graph& g, std::uint32_t s) {
    const Mat& y = g.value(s);
    const Mat& go = g.grad(s);
    Mat d = Mat::Zero(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      double gs = 0.0;
      for (Eigen::Index j = 0; j < y.cols(); ++j)
        if (mask(i, j) != 0.0) gs += go(i, j);
      for (Eigen::Index j = 0; j < y.cols(); ++j)
        if (mask(i, j) != 0.0) d(i, j) = go(i, j) - std::exp(y(i, j)) * gs;
    }
    g.accumulate(il, d);
  });
}

}  // namespace lats::nn
