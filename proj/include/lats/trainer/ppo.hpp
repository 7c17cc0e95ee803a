#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "lats/common/rng.hpp"
#include "lats/trainer/model.hpp"

namespace lats::trainer {

/// One synchronized episode. Sample index is t * n_agents + agent.
struct TrajectoryBatch {
  int n_agents = 0;
  int steps = 0;
  Mat S, S_next;              // N x (m_max*5)
  Mat G;                      // (N*p_max) x m_max
  Mat phase_mask;             // N x p_max
  Mat movement_mask;          // N x m_max
  Mat I;                      // N x topology dim
  Mat h_in;                   // N x d, GRU state fed to the step
  Mat E;                      // (N*p_max) x e_dim, empty unless the teacher is trained
  std::vector<std::uint64_t> prompt_hashes;  // N*p_max, 0 on padding or when unused
  std::vector<int> action;
  std::vector<double> log_prob, value, reward;  // reward unscaled: -stopped on incoming lanes
  std::vector<char> done;
  std::vector<double> bootstrap_value;  // per agent, V at the state after the last step
  std::size_t size() const { return action.size(); }
  double mean_reward() const;
};

struct RolloutOptions {
  std::uint64_t sim_seed = 0;
  std::uint64_t action_seed = 0;
  int steps = 360;
  policy::ActionMode mode = policy::ActionMode::sample;
  sim::SimConfig sim;
};

/// All agents act on the same 10 s boundaries and are rewarded there.
/// The provider and cache are required when the variant uses the teacher.
TrajectoryBatch collect_rollout(const LatsModel& model, const net::NetworkSpec& net, const net::DemandSpec& demand,
                                const RolloutOptions& opt, ts::EmbeddingProvider* provider = nullptr,
                                ts::EmbeddingCache* cache = nullptr);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// One agent's stream. A done flag at t stops bootstrapping past t.
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values, double value_next,
                      double gamma, double lambda, const std::vector<char>& dones = {});

/// Mean 0, std 1 (std floored at 1e-8), in place.
void normalize_advantages(std::vector<double>& adv);

struct PpoTargets {
  std::vector<int> actions;
  Mat log_prob_old;   // B x 1
  Mat advantages;     // B x 1
  Mat returns;        // B x 1
  Mat S_next;         // B x (m_max*5)
  Mat movement_mask;  // B x m_max
  Mat weight;         // B x 1, per-sample weights (1/B for a plain mean)
};

struct PpoTerms {
  Var l_pi;     // -E[min(r A, clip(r) A)]
  Var l_v;      // E[(R - V)^2]
  Var entropy;  // E[H(pi)] over unmasked actions
  Var l_pred;   // E[(S_hat - S')^2] over real movement entries
  Var ratio;    // B x 1, pi_new(a) / pi_old(a)
};

PpoTerms ppo_losses(Graph& g, const policy::PolicyOutput& out, const PpoTargets& t, double clip);

struct UpdateReport {
  double total = 0, l_pi = 0, l_v = 0, entropy = 0, l_pred = 0;
  double recon_s = 0, recon_c = 0, kl_prior_s = 0, kl_prior_c = 0, align = 0, ts_total = 0;
  double grad_norm = 0;  // pre-clip, averaged over minibatches
  double clip_fraction = 0;
  int minibatches = 0;
};

/// PPO epochs over the batch with the joint loss
/// L^rl + ts_scale * L^ts, L^rl = L_pi + c1 L_v - c2 H + c3 L_pred,
/// averaged over agent-steps. Throws NonFiniteLoss after writing the offending
/// minibatch to dump_dir.
UpdateReport total_update(LatsModel& model, nn::Adam& opt, const TrajectoryBatch& batch, Rng& rng,
                          const std::string& dump_dir = ".");

/// Loss of one minibatch as a graph node (exposed for gradient checks).
struct MinibatchLoss {
  Var total;
  PpoTerms ppo;
  ts::TsTerms ts;
};
MinibatchLoss minibatch_loss(Graph& g, const LatsModel& model, const TrajectoryBatch& batch,
                             const std::vector<std::size_t>& idx, const std::vector<double>& advantages,
                             const std::vector<double>& returns, const Mat& noise_s, const Mat& noise_c);

struct TrainLogRow {
  int episode = 0;
  UpdateReport update;
  double mean_reward = 0.0;
  std::size_t provider_texts = 0;
};

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const TrainLogRow& row);

struct TrainOptions {
  std::string out_dir;          // where log and checkpoints go; empty = nothing written
  int checkpoint_every = 0;     // episodes; 0 = only the final checkpoint
  std::function<void(const TrainLogRow&)> on_episode;
};

/// Full training loop on one network/demand pair. Episode k uses simulator seed
/// derive_seed(seed, 1000 + k). Returns the per-episode log.
std::vector<TrainLogRow> train(LatsModel& model, const net::NetworkSpec& net, const net::DemandSpec& demand,
                               ts::EmbeddingProvider* provider, const TrainOptions& opt);

}  // namespace lats::trainer
