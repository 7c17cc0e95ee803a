#include "lats/trainer/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lats/common/errors.hpp"

namespace lats::trainer {

using nlohmann::json;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_t: return "no_t";
    case Variant::no_s: return "no_s";
    case Variant::no_ts: return "no_ts";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "no_t") return Variant::no_t;
  if (s == "no_s") return Variant::no_s;
  if (s == "no_ts") return Variant::no_ts;
  throw ArgumentError("unknown variant '" + s + "' (full, no_t, no_s, no_ts)");
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ArgumentError(std::string("config: ") + what);
  };
  need(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
  need(lambda > 0.0 && lambda <= 1.0, "lambda must be in (0, 1]");
  need(clip > 0.0, "clip must be positive");
  need(lr > 0.0, "lr must be positive");
  need(epochs >= 1 && minibatch >= 1 && episodes >= 0, "epochs/minibatch must be positive");
  need(max_grad_norm > 0.0 && reward_scale > 0.0, "max_grad_norm and reward_scale must be positive");
  need(decision_s > 0 && horizon_s > 0 && horizon_s % decision_s == 0,
       "horizon_s must be a positive multiple of decision_s");
  need(d > 0 && p_max > 0 && m_max > 0 && latent > 0 && vae_hidden > 0 && heads > 0, "sizes must be positive");
  need(c1 >= 0.0 && c2 >= 0.0 && c3 >= 0.0 && ts_scale >= 0.0, "loss weights must be non-negative");
}

namespace {

json to_json(const TrainConfig& c) {
  return json{{"gamma", c.gamma},
              {"lambda", c.lambda},
              {"clip", c.clip},
              {"c1", c.c1},
              {"c2", c.c2},
              {"c3", c.c3},
              {"lr", c.lr},
              {"epochs", c.epochs},
              {"minibatch", c.minibatch},
              {"max_grad_norm", c.max_grad_norm},
              {"reward_scale", c.reward_scale},
              {"episodes", c.episodes},
              {"seed", c.seed},
              {"horizon_s", c.horizon_s},
              {"decision_s", c.decision_s},
              {"d", c.d},
              {"p_max", c.p_max},
              {"m_max", c.m_max},
              {"latent", c.latent},
              {"vae_hidden", c.vae_hidden},
              {"heads", c.heads},
              {"head_gain", c.head_gain},
              {"variant", to_string(c.variant)},
              {"ts_weights",
               {{"recon_s", c.ts_weights.recon_s},
                {"recon_c", c.ts_weights.recon_c},
                {"kl_prior_s", c.ts_weights.kl_prior_s},
                {"kl_prior_c", c.ts_weights.kl_prior_c},
                {"align", c.ts_weights.align}}},
              {"ts_scale", c.ts_scale},
              {"cache_capacity", c.cache_capacity}};
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainConfig load_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("config must be a JSON object");
  const json known = to_json(TrainConfig{});
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) throw SchemaError("unknown config key '" + it.key() + "'");
  }
  TrainConfig c;
  try {
    take(j, "gamma", c.gamma);
    take(j, "lambda", c.lambda);
    take(j, "clip", c.clip);
    take(j, "c1", c.c1);
    take(j, "c2", c.c2);
    take(j, "c3", c.c3);
    take(j, "lr", c.lr);
    take(j, "epochs", c.epochs);
    take(j, "minibatch", c.minibatch);
    take(j, "max_grad_norm", c.max_grad_norm);
    take(j, "reward_scale", c.reward_scale);
    take(j, "episodes", c.episodes);
    take(j, "seed", c.seed);
    take(j, "horizon_s", c.horizon_s);
    take(j, "decision_s", c.decision_s);
    take(j, "d", c.d);
    take(j, "p_max", c.p_max);
    take(j, "m_max", c.m_max);
    take(j, "latent", c.latent);
    take(j, "vae_hidden", c.vae_hidden);
    take(j, "heads", c.heads);
    take(j, "head_gain", c.head_gain);
    if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("ts_weights")) {
      const json& w = j.at("ts_weights");
      for (auto it = w.begin(); it != w.end(); ++it) {
        if (!known["ts_weights"].contains(it.key())) throw SchemaError("unknown ts_weights key '" + it.key() + "'");
      }
      take(w, "recon_s", c.ts_weights.recon_s);
      take(w, "recon_c", c.ts_weights.recon_c);
      take(w, "kl_prior_s", c.ts_weights.kl_prior_s);
      take(w, "kl_prior_c", c.ts_weights.kl_prior_c);
      take(w, "align", c.ts_weights.align);
    }
    take(j, "ts_scale", c.ts_scale);
    take(j, "cache_capacity", c.cache_capacity);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config field has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

std::string render_config(const TrainConfig& cfg) { return to_json(cfg).dump(2); }

}  // namespace lats::trainer
