#include "lats/ts/vae.hpp"

#include <cmath>

#include "lats/common/errors.hpp"

namespace lats::ts {

double gaussian_kl(const LatentGaussian& a, const LatentGaussian& b) {
  if (a.mu.size() != b.mu.size() || a.logvar.size() != a.mu.size() || b.logvar.size() != b.mu.size()) {
    throw ShapeError("gaussian_kl: dimension mismatch");
  }
  double kl = 0.0;
  for (Eigen::Index j = 0; j < a.mu.size(); ++j) {
    const double va = std::exp(a.logvar(j)), vb = std::exp(b.logvar(j));
    const double dm = a.mu(j) - b.mu(j);
    kl += 0.5 * (b.logvar(j) - a.logvar(j)) + (va + dm * dm) / (2.0 * vb) - 0.5;
  }
  return kl;
}

Var gaussian_kl_rows(Var mu_a, Var logvar_a, Var mu_b, Var logvar_b) {
  Var dm = nn::sub(mu_a, mu_b);
  Var num = nn::add(nn::exp(logvar_a), nn::square(dm));
  Var ratio = nn::mul(num, nn::exp(nn::scale(logvar_b, -1.0)));
  Var per_dim = nn::scale(nn::add_scalar(nn::add(nn::sub(logvar_b, logvar_a), ratio), -1.0), 0.5);
  return nn::row_sum(per_dim);
}

Var kl_to_standard_rows(Var mu, Var logvar) {
  Var per_dim = nn::sub(nn::add(nn::exp(logvar), nn::square(mu)), nn::add_scalar(logvar, 1.0));
  return nn::scale(nn::row_sum(per_dim), 0.5);
}

Vae::Vae(nn::ParamStore& ps, const std::string& prefix, Eigen::Index in_dim, Eigen::Index hidden,
         Eigen::Index latent)
    : prefix_(prefix), in_dim_(in_dim), latent_(latent) {
  enc_ = nn::Linear::create(ps, prefix + ".enc", in_dim, hidden);
  mu_ = nn::Linear::create(ps, prefix + ".mu", hidden, latent);
  logvar_ = nn::Linear::create(ps, prefix + ".logvar", hidden, latent);
  dec1_ = nn::Linear::create(ps, prefix + ".dec1", latent, hidden);
  dec2_ = nn::Linear::create(ps, prefix + ".dec2", hidden, in_dim);
}

Encoded Vae::encode(Graph& g, Var x) const {
  if (x.cols() != in_dim_) {
    throw ShapeError(prefix_ + ": expected " + std::to_string(in_dim_) + " input columns, got " +
                     std::to_string(x.cols()));
  }
  Var h = nn::tanh(enc_(g, x));
  return {mu_(g, h), logvar_(g, h)};
}

Var Vae::decode(Graph& g, Var z) const {
  if (z.cols() != latent_) throw ShapeError(prefix_ + ": latent width mismatch");
  return dec2_(g, nn::tanh(dec1_(g, z)));
}

namespace {

// Sum over rows of weight * mean over columns of (a - b)^2.
Var weighted_mse(Graph& g, Var a, Var b, const Mat& w) {
  Var per_row = nn::scale(nn::row_sum(nn::square(nn::sub(a, b))), 1.0 / static_cast<double>(a.cols()));
  return nn::sum(nn::mul(per_row, g.constant(w)));
}

Var weighted(Graph& g, Var rows, const Mat& w) { return nn::sum(nn::mul(rows, g.constant(w))); }

}  // namespace

TsTerms ts_loss(Graph& g, const Vae& student, const Vae& teacher, const TsLossInputs& in, const TsParts& parts,
                const TsWeights& w) {
  const Eigen::Index n = in.weight.rows();
  if (in.weight.cols() != 1) throw ShapeError("ts_loss: weight must be N x 1");
  TsTerms t;
  Var zero = g.constant(0.0);
  t.recon_s = t.recon_c = t.kl_prior_s = t.kl_prior_c = t.align = zero;

  if (parts.student) {
    if (in.x.rows() != n || in.student.mu.rows() != n || in.noise_s.rows() != n) {
      throw ShapeError("ts_loss: student rows disagree");
    }
    Var z = nn::reparam_sample(in.student.mu, in.student.logvar, in.noise_s);
    t.recon_s = weighted_mse(g, student.decode(g, z), in.x, in.weight);
    t.kl_prior_s = weighted(g, kl_to_standard_rows(in.student.mu, in.student.logvar), in.weight);
  }
  if (parts.teacher) {
    if (in.e.rows() != n || in.teacher.mu.rows() != n || in.noise_c.rows() != n) {
      throw ShapeError("ts_loss: teacher rows disagree");
    }
    Var z = nn::reparam_sample(in.teacher.mu, in.teacher.logvar, in.noise_c);
    t.recon_c = weighted_mse(g, teacher.decode(g, z), in.e, in.weight);
    t.kl_prior_c = weighted(g, kl_to_standard_rows(in.teacher.mu, in.teacher.logvar), in.weight);
  }
  if (parts.align && parts.student && parts.teacher) {
    Var kl = gaussian_kl_rows(nn::detach(in.teacher.mu), nn::detach(in.teacher.logvar), in.student.mu,
                              in.student.logvar);
    t.align = weighted(g, kl, in.weight);
  }
  t.total = nn::add(nn::add(nn::add(nn::scale(t.recon_s, w.recon_s), nn::scale(t.recon_c, w.recon_c)),
                            nn::add(nn::scale(t.kl_prior_s, w.kl_prior_s), nn::scale(t.kl_prior_c, w.kl_prior_c))),
                    nn::scale(t.align, w.align));
  return t;
}

}  // namespace lats::ts
