#include "lats/policy/policy.hpp"

#include <cmath>
#include <iomanip>

#include "lats/common/errors.hpp"

namespace lats::policy {

PolicyInput make_input(const std::vector<const obs::ObservationBundle*>& obs, const Mat& h_prev,
                       const PolicyConfig& cfg) {
  const Eigen::Index B = static_cast<Eigen::Index>(obs.size());
  const Eigen::Index M = cfg.m_max, P = cfg.p_max;
  if (h_prev.rows() != B || h_prev.cols() != cfg.d) throw ShapeError("make_input: h_prev shape");
  PolicyInput in;
  in.S.resize(B, M * 5);
  in.G.resize(B * P, M);
  in.phase_mask.resize(B, P);
  in.movement_mask.resize(B, M);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& o = *obs[b];
    if (static_cast<Eigen::Index>(o.S.size()) != M * 5 || static_cast<Eigen::Index>(o.G.size()) != P * M) {
      throw ShapeError("observation padding does not match policy config");
    }
    in.S.row(b) = Eigen::Map<const Eigen::RowVectorXd>(o.S.data(), M * 5);
    in.G.middleRows(b * P, P) = Eigen::Map<const Mat>(o.G.data(), P, M);
    in.phase_mask.row(b) = Eigen::Map<const Eigen::RowVectorXd>(o.phase_mask.data(), P);
    in.movement_mask.row(b) = Eigen::Map<const Eigen::RowVectorXd>(o.movement_mask.data(), M);
  }
  in.h_prev = h_prev;
  return in;
}

Policy::Policy(nn::ParamStore& ps, PolicyConfig cfg) : cfg_(cfg) {
  const auto d = cfg.d;
  mlp_s_ = nn::Mlp2::create(ps, "policy.mlp_s", cfg.m_max * 5, d, d);
  gru_ = nn::GruParams::create(ps, "policy.gru", d, d);
  mlp_p_ = nn::Mlp2::create(ps, "policy.mlp_p", cfg.m_max, d, d);
  mha_ = nn::MhaParams::create(ps, "policy.mha", d, cfg.heads);
  mlp_sp_ = nn::Mlp2::create(ps, "policy.mlp_sp", cfg.latent, d, d);
  head_pi_ = nn::Linear::create(ps, "policy.head_pi", 2 * d, 1, cfg.head_gain);
  head_v_ = nn::Linear::create(ps, "policy.head_v", 2 * d, 1);
  head_pred_ = nn::Linear::create(ps, "policy.head_pred", 2 * d, cfg.m_max * 5);
}

PolicyOutput Policy::forward(Graph& g, const PolicyInput& in, Var z_mu) const {
  const Eigen::Index B = in.batch(), M = cfg_.m_max, P = cfg_.p_max, d = cfg_.d;
  if (in.S.cols() != M * 5 || in.G.rows() != B * P || in.G.cols() != M || in.phase_mask.rows() != B ||
      in.phase_mask.cols() != P || in.movement_mask.rows() != B || in.movement_mask.cols() != M ||
      in.h_prev.rows() != B || in.h_prev.cols() != d) {
    throw ShapeError("policy input shapes do not match config");
  }
  if (z_mu.rows() != B * P || z_mu.cols() != cfg_.latent) throw ShapeError("z_mu must be (B*p_max) x latent");

  // Zero every padded entry so padding content cannot leak into outputs.
  Mat s_mask(B, M * 5);
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index m = 0; m < M; ++m) s_mask.row(b).segment(m * 5, 5).setConstant(in.movement_mask(b, m));
  Mat row_mask(B * P, 1);
  Mat g_masked = in.G;
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index p = 0; p < P; ++p) {
      row_mask(b * P + p, 0) = in.phase_mask(b, p);
      g_masked.row(b * P + p) = g_masked.row(b * P + p).cwiseProduct(in.movement_mask.row(b)) * in.phase_mask(b, p);
    }
  Var rmask = g.constant(row_mask);

  Var S = g.constant(in.S.cwiseProduct(s_mask));
  Var h_s = mlp_s_(g, S);
  Var h_gru = nn::gru_cell(g, h_s, g.constant(in.h_prev), gru_);
  Var h_p = mlp_p_(g, g.constant(g_masked));
  // One key/value row per agent: the attention weight is exactly 1, so h_sp
  // does not vary across phases (phase identity reaches the heads via e_sp).
  Var h_sp = nn::mha_cross_single_kv(g, h_p, h_gru, mha_, row_mask);
  Var e_sp = nn::mul_rows(mlp_sp_(g, nn::mul_rows(z_mu, rmask)), rmask);
  Var h_tilde = nn::concat_cols({h_sp, e_sp});

  Var logits = nn::reshape(head_pi_(g, h_tilde), B, P);
  PolicyOutput out;
  out.log_pi = nn::masked_log_softmax(logits, in.phase_mask);
  out.pi = nn::masked_softmax(logits, in.phase_mask);
  // Value and prediction read the mean over real phases, so agents with
  // different phase counts share one scale.
  Mat pool = in.phase_mask;
  for (Eigen::Index b = 0; b < B; ++b) pool.row(b) /= pool.row(b).sum();
  out.value = nn::segment_sum(head_v_(g, h_tilde), pool);
  out.s_hat = head_pred_(g, nn::segment_sum(h_tilde, pool));
  out.h_gru = h_gru;
  out.h_sp = h_sp;
  out.h_tilde = h_tilde;
  return out;
}

ActionChoice select_action(const Eigen::Ref<const Eigen::RowVectorXd>& pi, ActionMode mode, Rng& rng) {
  ActionChoice c;
  if (mode == ActionMode::argmax) {
    for (Eigen::Index j = 1; j < pi.size(); ++j)
      if (pi(j) > pi(c.action)) c.action = static_cast<int>(j);
  } else {
    const double u = rng.uniform();
    double acc = 0.0;
    c.action = -1;
    for (Eigen::Index j = 0; j < pi.size(); ++j) {
      if (pi(j) <= 0.0) continue;
      acc += pi(j);
      c.action = static_cast<int>(j);
      if (u < acc) break;
    }
    if (c.action < 0) throw ShapeError("select_action: no probability mass");
  }
  c.log_prob = std::log(pi(c.action));
  for (Eigen::Index j = 0; j < pi.size(); ++j)
    if (pi(j) > 0.0) c.entropy -= pi(j) * std::log(pi(j));
  return c;
}

void export_phase_features(std::ostream& out, int step, const std::string& intersection,
                           const Mat& h, std::size_t n_phases, bool header) {
  if (header) {
    out << "step,intersection,phase";
    for (Eigen::Index k = 0; k < h.cols(); ++k) out << ",f" << k;
    out << '\n';
  }
  out << std::setprecision(17);
  for (std::size_t p = 0; p < n_phases; ++p) {
    out << step << ',' << intersection << ',' << p;
    for (Eigen::Index k = 0; k < h.cols(); ++k) out << ',' << h(static_cast<Eigen::Index>(p), k);
    out << '\n';
  }
}

}  // namespace lats::policy
