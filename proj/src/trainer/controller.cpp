#include "lats/trainer/controller.hpp"

#include "lats/common/errors.hpp"

namespace lats::trainer {

LatsController::LatsController(const LatsModel& model, policy::ActionMode mode, ts::EmbeddingProvider* provider,
                               std::size_t cache_capacity)
    : model_(model), mode_(mode), provider_(provider) {
  if (policy_needs_provider(model.variant())) {
    if (!provider_) {
      throw ProviderError("variant " + to_string(model.variant()) + " reads teacher latents at inference; "
                          "an embedding provider is required");
    }
    if (provider_->dim() != model.embedding_dim()) {
      throw ShapeError("provider width " + std::to_string(provider_->dim()) + " does not match the model's " +
                       std::to_string(model.embedding_dim()));
    }
    cache_ = std::make_unique<ts::EmbeddingCache>(cache_capacity);
  }
}

void LatsController::reset(std::uint64_t seed) {
  hist_.clear();
  h_.resize(0, 0);
  rng_ = Rng(seed);
}

std::vector<std::size_t> LatsController::decide(const sim::Simulator& sim, int /*step*/) {
  const TrainConfig& cfg = model_.config();
  const net::NetworkSpec& net = sim.network();
  const std::size_t n = net.intersections.size();
  const obs::ObsConfig oc = model_.obs_config();
  if (hist_.size() != n) {
    hist_.assign(n, obs::HistoryBuffer{});
    h_ = Mat::Zero(static_cast<Eigen::Index>(n), cfg.d);
  }
  std::vector<obs::ObservationBundle> cur;
  cur.reserve(n);
  for (std::size_t i = 0; i < n; ++i) cur.push_back(obs::encode_intersection(sim, i, hist_[i], oc));
  for (std::size_t i = 0; i < n; ++i) hist_[i].push(cur[i].S);

  std::vector<const obs::ObservationBundle*> ptrs;
  for (const auto& o : cur) ptrs.push_back(&o);
  policy::PolicyInput in = policy::make_input(ptrs, h_, policy_config(cfg));
  Mat I(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(obs::kTopologyDim));
  for (std::size_t i = 0; i < n; ++i) {
    I.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(cur[i].I.data(), static_cast<Eigen::Index>(obs::kTopologyDim));
  }
  Mat X = phase_inputs(in.S, in.G, I, cfg.p_max);
  Mat E;
  if (cache_) E = teacher_embeddings(cur, net, oc, *provider_, *cache_);
  Graph g(false);
  auto f = model_.forward(g, in, X, cache_ ? &E : nullptr);
  h_ = f.out.h_gru.value();
  last_pi_ = f.out.pi.value();
  last_features_ = f.out.h_tilde.value();
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::size_t>(
        policy::select_action(last_pi_.row(static_cast<Eigen::Index>(i)), mode_, rng_).action);
  }
  return out;
}

}  // namespace lats::trainer
