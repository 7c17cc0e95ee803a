#pragma once

#include <Eigen/Dense>
#include <string>

#include "lats/nn/layers.hpp"

namespace lats::ts {

using nn::Graph;
using nn::Mat;
using nn::Var;

struct LatentGaussian {
  Eigen::VectorXd mu;
  Eigen::VectorXd logvar;
};

/// KL(a || b) for diagonal Gaussians, summed over dimensions.
double gaussian_kl(const LatentGaussian& a, const LatentGaussian& b);

/// Row-wise KL(a || b) for batched diagonal Gaussians: N x 1.
Var gaussian_kl_rows(Var mu_a, Var logvar_a, Var mu_b, Var logvar_b);
/// Row-wise KL(q || N(0, I)): N x 1.
Var kl_to_standard_rows(Var mu, Var logvar);

struct Encoded {
  Var mu;
  Var logvar;
};

/// Encoder: Linear -> tanh -> {mu, logvar} heads. Decoder: Linear -> tanh -> Linear.
class Vae {
 public:
  Vae() = default;
  Vae(nn::ParamStore& ps, const std::string& prefix, Eigen::Index in_dim, Eigen::Index hidden = 128,
      Eigen::Index latent = 32);
  /// Throws ShapeError if x does not have in_dim columns.
  Encoded encode(Graph& g, Var x) const;
  Var decode(Graph& g, Var z) const;
  Eigen::Index in_dim() const { return in_dim_; }
  Eigen::Index latent() const { return latent_; }
  const std::string& prefix() const { return prefix_; }

 private:
  std::string prefix_;
  Eigen::Index in_dim_ = 0, latent_ = 0;
  nn::Linear enc_, mu_, logvar_, dec1_, dec2_;
};

struct TsWeights {
  double recon_s = 1.0;
  double recon_c = 1.0;
  double kl_prior_s = 1.0;
  double kl_prior_c = 1.0;
  double align = 1.0;
};

/// Which halves of the module take part in a loss evaluation.
struct TsParts {
  bool student = true;
  bool teacher = true;
  bool align = true;  // requires both
};

/// Per-row inputs: x are phase inputs, e teacher embeddings, weight an N x 1
/// column (zero on padded rows). Encodings may be computed by the caller so
/// that the student means can also feed the policy.
struct TsLossInputs {
  Var x;
  Encoded student;
  Var e;
  Encoded teacher;
  Mat noise_s;  // N x latent
  Mat noise_c;
  Mat weight;
};

struct TsTerms {
  Var recon_s, recon_c, kl_prior_s, kl_prior_c, align;
  Var total;
};

/// recon terms are per-row mean squared error; kl_prior terms are closed form
/// against N(0, I); align = KL(teacher || student) with the teacher side
/// detached. Every term is the weighted sum over rows. Disabled parts are 0.
TsTerms ts_loss(Graph& g, const Vae& student, const Vae& teacher, const TsLossInputs& in, const TsParts& parts,
                const TsWeights& w = {});

}  // namespace lats::ts
