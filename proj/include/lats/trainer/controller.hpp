#pragma once

#include <memory>

#include "lats/eval/controller.hpp"
#include "lats/trainer/model.hpp"

namespace lats::trainer {

/// Runs a trained model as a signal controller. Keeps per-agent history and
/// GRU state across decisions; reset() clears them.
class LatsController : public eval::Controller {
 public:
  /// The provider is only consulted by variants whose policy reads teacher
  /// latents (no_s); passing null for those throws ProviderError.
  LatsController(const LatsModel& model, policy::ActionMode mode = policy::ActionMode::argmax,
                 ts::EmbeddingProvider* provider = nullptr, std::size_t cache_capacity = 8192);

  std::string name() const override { return "lats_" + to_string(model_.variant()); }
  void reset(std::uint64_t seed) override;
  std::vector<std::size_t> decide(const sim::Simulator& sim, int step) override;

  /// Last forward's action distribution, one row per intersection.
  const Mat& last_pi() const { return last_pi_; }
  /// Last forward's fused phase features, (n * p_max) x 2d.
  const Mat& last_features() const { return last_features_; }

 private:
  const LatsModel& model_;
  policy::ActionMode mode_;
  ts::EmbeddingProvider* provider_;
  std::unique_ptr<ts::EmbeddingCache> cache_;
  std::vector<obs::HistoryBuffer> hist_;
  Mat h_;
  Mat last_pi_;
  Mat last_features_;
  Rng rng_{0};
};

}  // namespace lats::trainer
