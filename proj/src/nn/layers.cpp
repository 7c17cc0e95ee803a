#include "lats/nn/layers.hpp"

#include <cmath>

#include "lats/common/errors.hpp"

namespace lats::nn {

Var dense(Var x, Var W, Var b) { return add_bias(matmul(x, W), b); }

Linear Linear::create(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index out,
                      double gain) {
  Linear l;
  l.W = &ps.add(name + ".W", in, out, Init::uniform_fan_in, gain);
  l.b = &ps.add(name + ".b", 1, out, Init::zeros);
  return l;
}

Linear Linear::bind(ParamStore& ps, const std::string& name) {
  return Linear{&ps.get(name + ".W"), &ps.get(name + ".b")};
}

Var Linear::operator()(Graph& g, Var x) const { return dense(x, g.param(*W), g.param(*b)); }

Mlp2 Mlp2::create(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index hidden,
                  Eigen::Index out, double out_gain) {
  return Mlp2{Linear::create(ps, name + ".0", in, hidden), Linear::create(ps, name + ".1", hidden, out, out_gain)};
}

Var Mlp2::operator()(Graph& g, Var x) const { return l2(g, tanh(l1(g, x))); }

GruParams GruParams::create(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index d) {
  GruParams p;
  p.W_i = &ps.add(name + ".W_i", in, 3 * d, Init::uniform_fan_in);
  // Orthogonal recurrent weights, one block per gate.
  p.W_h = &ps.add(name + ".W_h", d, 3 * d, Init::zeros);
  {
    ParamStore scratch(ps.seed() ^ 0x6a09e667f3bcc908ULL);
    for (int k = 0; k < 3; ++k) {
      Tensor& blk = scratch.add("blk" + std::to_string(k), d, d, Init::orthogonal);
      p.W_h->value.middleCols(k * d, d) = blk.value;
    }
  }
  p.b_i = &ps.add(name + ".b_i", 1, 3 * d, Init::zeros);
  p.b_h = &ps.add(name + ".b_h", 1, 3 * d, Init::zeros);
  return p;
}

Var gru_cell(Graph& g, Var x, Var h, const GruParams& p) {
  const Eigen::Index d = p.W_h->value.rows();
  if (h.cols() != d || h.rows() != x.rows()) throw ShapeError("gru_cell: hidden shape mismatch");
  Var gi = dense(x, g.param(*p.W_i), g.param(*p.b_i));
  Var gh = dense(h, g.param(*p.W_h), g.param(*p.b_h));
  Var r = sigmoid(add(slice_cols(gi, 0, d), slice_cols(gh, 0, d)));
  Var z = sigmoid(add(slice_cols(gi, d, d), slice_cols(gh, d, d)));
  Var n = tanh(add(slice_cols(gi, 2 * d, d), mul(r, slice_cols(gh, 2 * d, d))));
  // h' = (1 - z) * n + z * h = n + z * (h - n)
  return add(n, mul(z, sub(h, n)));
}

MhaParams MhaParams::create(ParamStore& ps, const std::string& name, Eigen::Index d, int heads) {
  MhaParams p;
  for (int h = 0; h < heads; ++h) {
    const std::string k = std::to_string(h);
    p.W_Q.push_back(&ps.add(name + ".W_Q" + k, d, d, Init::uniform_fan_in));
    p.W_K.push_back(&ps.add(name + ".W_K" + k, d, d, Init::uniform_fan_in));
    p.W_V.push_back(&ps.add(name + ".W_V" + k, d, d, Init::uniform_fan_in));
  }
  p.W_O = &ps.add(name + ".W_O", heads * d, d, Init::uniform_fan_in);
  return p;
}

Var mha_cross(Graph& g, Var q_src, Var kv_src, const MhaParams& p, const Mat& query_mask) {
  const Eigen::Index d = p.W_O->value.cols();
  if (q_src.cols() != d || kv_src.cols() != d) throw ShapeError("mha_cross: width must equal d");
  if (query_mask.rows() != q_src.rows() || query_mask.cols() != 1) {
    throw ShapeError("mha_cross: mask length must match query rows");
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Var> heads;
  const Mat all_keys = Mat::Ones(q_src.rows(), kv_src.rows());
  for (int h = 0; h < p.heads(); ++h) {
    Var Q = matmul(q_src, g.param(*p.W_Q[h]));
    Var K = matmul(kv_src, g.param(*p.W_K[h]));
    Var V = matmul(kv_src, g.param(*p.W_V[h]));
    Var A = masked_softmax(scale(matmul_nt(Q, K), inv), all_keys);
    heads.push_back(matmul(A, V));
  }
  Var out = matmul(concat_cols(heads), g.param(*p.W_O));
  return mul_rows(out, g.constant(query_mask));
}

Var mha_cross_single_kv(Graph& g, Var q_src, Var kv, const MhaParams& p, const Mat& query_mask) {
  const Eigen::Index d = p.W_O->value.cols();
  const Eigen::Index B = kv.rows();
  if (kv.cols() != d || q_src.cols() != d) throw ShapeError("mha_cross_single_kv: width must equal d");
  if (B == 0 || q_src.rows() % B != 0) throw ShapeError("mha_cross_single_kv: query rows must be a multiple of B");
  const Eigen::Index n = q_src.rows() / B;
  if (query_mask.rows() != q_src.rows() || query_mask.cols() != 1) {
    throw ShapeError("mha_cross_single_kv: mask length must match query rows");
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  const Mat one_key = Mat::Ones(q_src.rows(), 1);
  std::vector<Var> heads;
  for (int h = 0; h < p.heads(); ++h) {
    Var Q = matmul(q_src, g.param(*p.W_Q[h]));
    Var K = repeat_rows(matmul(kv, g.param(*p.W_K[h])), n);
    Var V = repeat_rows(matmul(kv, g.param(*p.W_V[h])), n);
    Var A = masked_softmax(scale(row_sum(mul(Q, K)), inv), one_key);
    heads.push_back(mul_rows(V, A));
  }
  Var out = matmul(concat_cols(heads), g.param(*p.W_O));
  return mul_rows(out, g.constant(query_mask));
}

Var reparam_sample(Var mu, Var logvar, const Mat& noise) {
  if (noise.rows() != mu.rows() || noise.cols() != mu.cols()) throw ShapeError("reparam: noise shape");
  Graph& g = *mu.graph();
  return add(mu, mul(exp(scale(logvar, 0.5)), g.constant(noise)));
}

}  // namespace lats::nn
