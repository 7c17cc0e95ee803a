#pragma once

#include <string>
#include <vector>

#include "lats/nn/autodiff.hpp"
#include "lats/nn/params.hpp"

namespace lats::nn {

/// y = x W + b, W is in x out.
Var dense(Var x, Var W, Var b);

struct Linear {
  Tensor* W = nullptr;
  Tensor* b = nullptr;
  static Linear create(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index out,
                       double gain = 1.0);
  static Linear bind(ParamStore& ps, const std::string& name);
  Var operator()(Graph& g, Var x) const;
};

/// Linear -> tanh -> Linear.
struct Mlp2 {
  Linear l1, l2;
  static Mlp2 create(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index hidden,
                     Eigen::Index out, double out_gain = 1.0);
  Var operator()(Graph& g, Var x) const;
};

/// Standard GRU cell (reset gate applied to the recurrent candidate term).
struct GruParams {
  Tensor* W_i = nullptr;  // in x 3d  (r, z, n)
  Tensor* W_h = nullptr;  // d x 3d
  Tensor* b_i = nullptr;  // 1 x 3d
  Tensor* b_h = nullptr;
  static GruParams create(ParamStore& ps, const std::string& name, Eigen::Index in, Eigen::Index d);
};
Var gru_cell(Graph& g, Var x, Var h_prev, const GruParams& p);

struct MhaParams {
  std::vector<Tensor*> W_Q, W_K, W_V;  // per head, d x d
  Tensor* W_O = nullptr;               // heads*d x d
  static MhaParams create(ParamStore& ps, const std::string& name, Eigen::Index d, int heads = 4);
  int heads() const { return static_cast<int>(W_Q.size()); }
};

/// Cross-attention of queries (n x d) over keys/values (m x d); each head
/// scales scores by 1/sqrt(d). Rows with query_mask == 0 are zero.
Var mha_cross(Graph& g, Var q_src, Var kv_src, const MhaParams& p, const Mat& query_mask);

/// Batched form for one key/value row per sample: q_src is (B*n) x d in
/// per-sample blocks of n rows, kv is B x d. Same maths as mha_cross per block.
Var mha_cross_single_kv(Graph& g, Var q_src, Var kv, const MhaParams& p, const Mat& query_mask);

/// z = mu + exp(logvar / 2) * noise, noise supplied by the caller.
Var reparam_sample(Var mu, Var logvar, const Mat& noise);

}  // namespace lats::nn
