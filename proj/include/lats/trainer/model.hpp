#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lats/obs/encoder.hpp"
#include "lats/policy/policy.hpp"
#include "lats/trainer/config.hpp"
#include "lats/ts/embedding.hpp"
#include "lats/ts/vae.hpp"

namespace lats::trainer {

using nn::Graph;
using nn::Mat;
using nn::Var;

/// Shared parameters for all agents: policy plus both VAEs. Both VAEs always
/// exist so checkpoints have one layout; the variant decides which are used.
class LatsModel {
 public:
  LatsModel(const TrainConfig& cfg, std::size_t embedding_dim = ts::kEmbeddingDim);

  const TrainConfig& config() const { return cfg_; }
  Variant variant() const { return cfg_.variant; }
  std::size_t embedding_dim() const { return e_dim_; }
  obs::ObsConfig obs_config() const;
  Eigen::Index x_dim() const { return x_dim_; }

  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }
  const policy::Policy& policy() const { return policy_; }
  const ts::Vae& student() const { return student_; }
  const ts::Vae& teacher() const { return teacher_; }

  struct Forward {
    policy::PolicyOutput out;
    ts::Encoded student;  // valid when the variant uses the student
    ts::Encoded teacher;  // valid when E was supplied and the variant uses the teacher
    Var z_mu;
  };
  /// X is (B*p_max) x x_dim phase inputs; E is (B*p_max) x embedding_dim or
  /// null. The no_s variant requires E.
  Forward forward(Graph& g, const policy::PolicyInput& in, const Mat& X, const Mat* E) const;

  /// Checkpoint with the config and embedding width in the metadata.
  void save(const std::string& path) const;
  static std::unique_ptr<LatsModel> load(const std::string& path);

 private:
  TrainConfig cfg_;
  std::size_t e_dim_;
  Eigen::Index x_dim_;
  nn::ParamStore ps_;
  policy::Policy policy_;
  ts::Vae student_, teacher_;
};

policy::PolicyConfig policy_config(const TrainConfig& cfg);

/// Rows [S_b, G_bp, I_b] for every (sample, phase): (B*p_max) x x_dim.
Mat phase_inputs(const Mat& S, const Mat& G, const Mat& I, Eigen::Index p_max);

/// Prompts for every real phase of each bundle, looked up through the cache.
/// Returns (N*p_max) x dim with zero rows for padded phases; hashes per row
/// (0 for padding) go to `hashes` when non-null.
Mat teacher_embeddings(const std::vector<obs::ObservationBundle>& bundles, const net::NetworkSpec& net,
                       const obs::ObsConfig& ocfg, ts::EmbeddingProvider& provider, ts::EmbeddingCache& cache,
                       std::vector<std::uint64_t>* hashes = nullptr);

}  // namespace lats::trainer
