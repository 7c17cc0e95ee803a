#include "lats/common/errors.hpp"
#include "lats/common/hash.hpp"
#include "lats/trainer/ppo.hpp"

namespace lats::trainer {

double TrajectoryBatch::mean_reward() const {
  if (reward.empty()) return 0.0;
  double s = 0.0;
  for (double r : reward) s += r;
  return s / static_cast<double>(reward.size());
}

namespace {

Mat topology_rows(const std::vector<obs::ObservationBundle>& obs) {
  Mat I(static_cast<Eigen::Index>(obs.size()), static_cast<Eigen::Index>(obs::kTopologyDim));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    I.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(obs[i].I.data(), static_cast<Eigen::Index>(obs::kTopologyDim));
  }
  return I;
}

}  // namespace

TrajectoryBatch collect_rollout(const LatsModel& model, const net::NetworkSpec& net, const net::DemandSpec& demand,
                                const RolloutOptions& opt, ts::EmbeddingProvider* provider,
                                ts::EmbeddingCache* cache) {
  const TrainConfig& cfg = model.config();
  const obs::ObsConfig oc = model.obs_config();
  const policy::PolicyConfig pc = policy_config(cfg);
  const bool need_e = uses_teacher(cfg.variant);
  if (need_e && (!provider || !cache)) {
    throw ProviderError("variant " + to_string(cfg.variant) + " needs an embedding provider during training");
  }
  if (need_e && provider->dim() != model.embedding_dim()) {
    throw ShapeError("provider width " + std::to_string(provider->dim()) + " does not match the model's " +
                     std::to_string(model.embedding_dim()));
  }
  if (opt.steps <= 0) throw ArgumentError("rollout needs at least one step");

  const Eigen::Index N = static_cast<Eigen::Index>(net.intersections.size());
  const Eigen::Index P = cfg.p_max, M = cfg.m_max;
  const Eigen::Index NT = N * opt.steps;
  sim::Simulator sim(net, demand, opt.sim_seed, opt.sim);
  std::vector<obs::HistoryBuffer> hist(static_cast<std::size_t>(N));
  Rng rng(opt.action_seed);

  TrajectoryBatch b;
  b.n_agents = static_cast<int>(N);
  b.steps = opt.steps;
  b.S.resize(NT, M * 5);
  b.S_next.resize(NT, M * 5);
  b.G.resize(NT * P, M);
  b.phase_mask.resize(NT, P);
  b.movement_mask.resize(NT, M);
  b.I.resize(NT, static_cast<Eigen::Index>(obs::kTopologyDim));
  b.h_in.resize(NT, cfg.d);
  if (need_e) b.E.resize(NT * P, static_cast<Eigen::Index>(model.embedding_dim()));
  b.prompt_hashes.assign(static_cast<std::size_t>(NT * P), 0);
  b.action.assign(static_cast<std::size_t>(NT), 0);
  b.log_prob.assign(static_cast<std::size_t>(NT), 0.0);
  b.value.assign(static_cast<std::size_t>(NT), 0.0);
  b.reward.assign(static_cast<std::size_t>(NT), 0.0);
  b.done.assign(static_cast<std::size_t>(NT), 0);

  auto observe = [&] {
    std::vector<obs::ObservationBundle> out;
    out.reserve(static_cast<std::size_t>(N));
    for (Eigen::Index i = 0; i < N; ++i) {
      out.push_back(obs::encode_intersection(sim, static_cast<std::size_t>(i), hist[static_cast<std::size_t>(i)], oc));
    }
    for (Eigen::Index i = 0; i < N; ++i) hist[static_cast<std::size_t>(i)].push(out[static_cast<std::size_t>(i)].S);
    return out;
  };
  auto as_ptrs = [](const std::vector<obs::ObservationBundle>& o) {
    std::vector<const obs::ObservationBundle*> p;
    for (const auto& x : o) p.push_back(&x);
    return p;
  };

  Mat h = Mat::Zero(N, cfg.d);
  std::vector<obs::ObservationBundle> cur = observe();
  for (int t = 0; t < opt.steps; ++t) {
    policy::PolicyInput in = policy::make_input(as_ptrs(cur), h, pc);
    Mat Imat = topology_rows(cur);
    Mat X = phase_inputs(in.S, in.G, Imat, P);
    Mat E;
    std::vector<std::uint64_t> hashes;
    if (need_e) E = teacher_embeddings(cur, net, oc, *provider, *cache, &hashes);
    Graph g(false);
    auto f = model.forward(g, in, X, need_e ? &E : nullptr);
    const Mat& pi = f.out.pi.value();
    const Mat& log_pi = f.out.log_pi.value();
    for (Eigen::Index i = 0; i < N; ++i) {
      const Eigen::Index row = t * N + i;
      const auto r = static_cast<std::size_t>(row);
      b.S.row(row) = in.S.row(i);
      b.G.middleRows(row * P, P) = in.G.middleRows(i * P, P);
      b.phase_mask.row(row) = in.phase_mask.row(i);
      b.movement_mask.row(row) = in.movement_mask.row(i);
      b.I.row(row) = Imat.row(i);
      b.h_in.row(row) = h.row(i);
      if (need_e) {
        b.E.middleRows(row * P, P) = E.middleRows(i * P, P);
        for (Eigen::Index p = 0; p < P; ++p) {
          b.prompt_hashes[static_cast<std::size_t>(row * P + p)] = hashes[static_cast<std::size_t>(i * P + p)];
        }
      }
      policy::ActionChoice c = policy::select_action(pi.row(i), opt.mode, rng);
      b.action[r] = c.action;
      b.log_prob[r] = log_pi(i, c.action);
      b.value[r] = f.out.value.value()(i, 0);
    }
    h = f.out.h_gru.value();
    for (Eigen::Index i = 0; i < N; ++i) {
      sim.apply_phase(static_cast<std::size_t>(i), static_cast<std::size_t>(b.action[static_cast<std::size_t>(t * N + i)]));
    }
    for (int k = 0; k < cfg.decision_s; ++k) sim.step();
    cur = observe();
    for (Eigen::Index i = 0; i < N; ++i) {
      const Eigen::Index row = t * N + i;
      b.reward[static_cast<std::size_t>(row)] = cur[static_cast<std::size_t>(i)].reward;
      b.S_next.row(row) =
          Eigen::Map<const Eigen::RowVectorXd>(cur[static_cast<std::size_t>(i)].S.data(), M * 5);
    }
  }
  for (Eigen::Index i = 0; i < N; ++i) b.done[static_cast<std::size_t>((opt.steps - 1) * N + i)] = 1;

  // Value of the state after the last step, for bootstrapping the truncated episode.
  policy::PolicyInput in = policy::make_input(as_ptrs(cur), h, pc);
  Mat X = phase_inputs(in.S, in.G, topology_rows(cur), P);
  Mat E;
  if (policy_needs_provider(cfg.variant)) E = teacher_embeddings(cur, net, oc, *provider, *cache);
  Graph g(false);
  auto f = model.forward(g, in, X, policy_needs_provider(cfg.variant) ? &E : nullptr);
  for (Eigen::Index i = 0; i < N; ++i) b.bootstrap_value.push_back(f.out.value.value()(i, 0));
  return b;
}

}  // namespace lats::trainer
