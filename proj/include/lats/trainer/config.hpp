#pragma once

#include <cstdint>
#include <string>

#include "lats/ts/vae.hpp"

namespace lats::trainer {

enum class Variant { full, no_t, no_s, no_ts };

std::string to_string(Variant v);
/// Throws ArgumentError on unknown names.
Variant variant_from_string(const std::string& s);

/// Student VAE trained and its means feed the policy.
inline bool uses_student(Variant v) { return v == Variant::full || v == Variant::no_t; }
/// Teacher VAE trained; needs embeddings during training.
inline bool uses_teacher(Variant v) { return v == Variant::full || v == Variant::no_s; }
/// Policy consumes teacher means, so the provider is needed at evaluation too.
inline bool policy_needs_provider(Variant v) { return v == Variant::no_s; }

struct TrainConfig {
  // PPO
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double c1 = 0.5;   // value loss
  double c2 = 0.01;  // entropy bonus
  double c3 = 0.1;   // next-state prediction
  double lr = 3e-4;
  int epochs = 4;
  int minibatch = 512;  // agent-steps
  double max_grad_norm = 0.5;
  double reward_scale = 1.0;  // rewards are multiplied by this before GAE
  // schedule
  int episodes = 300;
  std::uint64_t seed = 1;
  int horizon_s = 3600;
  int decision_s = 10;
  // architecture
  int d = 64;
  int p_max = 8;
  int m_max = 36;
  int latent = 32;
  int vae_hidden = 128;
  int heads = 4;
  double head_gain = 0.01;
  // teacher-student
  Variant variant = Variant::full;
  ts::TsWeights ts_weights;
  double ts_scale = 1.0;  // weight of L^ts against L^rl
  std::size_t cache_capacity = 8192;

  /// Throws ArgumentError when a field is out of range.
  void validate() const;
};

/// JSON object with the field names above; missing keys keep defaults,
/// unknown keys throw SchemaError.
TrainConfig load_config(const std::string& json_text);
TrainConfig load_config_file(const std::string& path);
std::string render_config(const TrainConfig& cfg);

}  // namespace lats::trainer
