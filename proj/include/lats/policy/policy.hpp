#pragma once

#include <ostream>
#include <vector>

#include "lats/common/rng.hpp"
#include "lats/nn/layers.hpp"
#include "lats/obs/encoder.hpp"

namespace lats::policy {

using nn::Graph;
using nn::Mat;
using nn::Var;

struct PolicyConfig {
  Eigen::Index d = 64;
  Eigen::Index m_max = 36;
  Eigen::Index p_max = 8;
  Eigen::Index latent = 32;
  int heads = 4;
  double head_gain = 0.01;  // small initial logits
};

/// Batched policy inputs for B agent-steps. Masks are applied inside forward.
struct PolicyInput {
  Mat S;               // B x (m_max*5)
  Mat G;               // (B*p_max) x m_max
  Mat phase_mask;      // B x p_max
  Mat movement_mask;   // B x m_max
  Mat h_prev;          // B x d
  Eigen::Index batch() const { return S.rows(); }
};

PolicyInput make_input(const std::vector<const obs::ObservationBundle*>& obs, const Mat& h_prev,
                       const PolicyConfig& cfg);

struct PolicyOutput {
  Var log_pi;  // B x p_max, 0 on masked entries
  Var pi;      // B x p_max, exactly 0 on masked entries
  Var value;   // B x 1
  Var s_hat;   // B x (m_max*5)
  Var h_gru;   // B x d
  Var h_sp;    // (B*p_max) x d
  Var h_tilde; // (B*p_max) x 2d
};

/// Shared actor-critic: state MLP -> GRU -> phase MLP -> cross-attention ->
/// fusion with latent means -> policy / value / prediction heads.
class Policy {
 public:
  Policy(nn::ParamStore& ps, PolicyConfig cfg);
  const PolicyConfig& config() const { return cfg_; }

  /// z_mu is (B*p_max) x latent. Throws ShapeError on inconsistent shapes.
  PolicyOutput forward(Graph& g, const PolicyInput& in, Var z_mu) const;

 private:
  PolicyConfig cfg_;
  nn::Mlp2 mlp_s_, mlp_p_, mlp_sp_;
  nn::GruParams gru_;
  nn::MhaParams mha_;
  nn::Linear head_pi_, head_v_, head_pred_;
};

enum class ActionMode { sample, argmax };

struct ActionChoice {
  int action = 0;
  double log_prob = 0.0;
  double entropy = 0.0;
};

/// pi is one row of probabilities; argmax ties go to the lowest index.
ActionChoice select_action(const Eigen::Ref<const Eigen::RowVectorXd>& pi, ActionMode mode, Rng& rng);

/// One CSV row per real phase: step,intersection,phase,f0..f{2d-1}
void export_phase_features(std::ostream& out, int step, const std::string& intersection,
                           const Mat& h_tilde_rows, std::size_t n_phases, bool header);

}  // namespace lats::policy
