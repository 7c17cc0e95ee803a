#include "lats/trainer/model.hpp"

#include "json.hpp"
#include "lats/common/errors.hpp"
#include "lats/ts/prompt.hpp"

namespace lats::trainer {

policy::PolicyConfig policy_config(const TrainConfig& cfg) {
  policy::PolicyConfig p;
  p.d = cfg.d;
  p.m_max = cfg.m_max;
  p.p_max = cfg.p_max;
  p.latent = cfg.latent;
  p.heads = cfg.heads;
  p.head_gain = cfg.head_gain;
  return p;
}

LatsModel::LatsModel(const TrainConfig& cfg, std::size_t embedding_dim)
    : cfg_(cfg),
      e_dim_(embedding_dim),
      x_dim_(static_cast<Eigen::Index>(obs::phase_input_dim(obs_config()))),
      ps_(cfg.seed),
      policy_(ps_, policy_config(cfg)),
      student_(ps_, "ts.student", x_dim_, cfg.vae_hidden, cfg.latent),
      teacher_(ps_, "ts.teacher", static_cast<Eigen::Index>(embedding_dim), cfg.vae_hidden, cfg.latent) {
  cfg_.validate();
}

obs::ObsConfig LatsModel::obs_config() const {
  obs::ObsConfig o;
  o.m_max = static_cast<std::size_t>(cfg_.m_max);
  o.p_max = static_cast<std::size_t>(cfg_.p_max);
  return o;
}

LatsModel::Forward LatsModel::forward(Graph& g, const policy::PolicyInput& in, const Mat& X, const Mat* E) const {
  Forward f;
  const Eigen::Index rows = in.batch() * cfg_.p_max;
  if (X.rows() != rows) throw ShapeError("phase input rows do not match the batch");
  if (uses_student(cfg_.variant)) f.student = student_.encode(g, g.constant(X));
  if (E && uses_teacher(cfg_.variant)) {
    if (E->rows() != rows) throw ShapeError("embedding rows do not match the batch");
    f.teacher = teacher_.encode(g, g.constant(*E));
  }
  switch (cfg_.variant) {
    case Variant::full:
    case Variant::no_t:
      f.z_mu = f.student.mu;
      break;
    case Variant::no_s:
      if (!E) throw ProviderError("the no_s variant feeds teacher latents to the policy and needs embeddings");
      f.z_mu = f.teacher.mu;
      break;
    case Variant::no_ts:
      f.z_mu = g.constant(Mat::Zero(rows, cfg_.latent));
      break;
  }
  f.out = policy_.forward(g, in, f.z_mu);
  return f;
}

void LatsModel::save(const std::string& path) const {
  nlohmann::json meta{{"kind", "lats-model"},
                      {"embedding_dim", e_dim_},
                      {"config", nlohmann::json::parse(render_config(cfg_))}};
  ps_.save(path, meta.dump());
}

std::unique_ptr<LatsModel> LatsModel::load(const std::string& path) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(nn::read_checkpoint_metadata(path));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("checkpoint '" + path + "' has unreadable metadata: " + e.what());
  }
  if (meta.value("kind", "") != "lats-model") throw SchemaError("checkpoint '" + path + "' is not a model checkpoint");
  TrainConfig cfg = load_config(meta.at("config").dump());
  auto m = std::make_unique<LatsModel>(cfg, meta.at("embedding_dim").get<std::size_t>());
  m->ps_.load(path);
  return m;
}

Mat phase_inputs(const Mat& S, const Mat& G, const Mat& I, Eigen::Index P) {
  const Eigen::Index B = S.rows(), M = G.cols();
  if (G.rows() != B * P || I.rows() != B) throw ShapeError("phase_inputs: row mismatch");
  Mat X(B * P, S.cols() + M + I.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index p = 0; p < P; ++p) {
      const Eigen::Index r = b * P + p;
      X.block(r, 0, 1, S.cols()) = S.row(b);
      X.block(r, S.cols(), 1, M) = G.row(r);
      X.block(r, S.cols() + M, 1, I.cols()) = I.row(b);
    }
  }
  return X;
}

Mat teacher_embeddings(const std::vector<obs::ObservationBundle>& bundles, const net::NetworkSpec& net,
                       const obs::ObsConfig& ocfg, ts::EmbeddingProvider& provider, ts::EmbeddingCache& cache,
                       std::vector<std::uint64_t>* hashes) {
  const Eigen::Index P = static_cast<Eigen::Index>(ocfg.p_max);
  std::vector<ts::PromptDoc> docs;
  std::vector<Eigen::Index> rows;
  for (std::size_t b = 0; b < bundles.size(); ++b) {
    for (std::size_t p = 0; p < bundles[b].n_phases; ++p) {
      docs.push_back(ts::render_prompt(obs::prompt_source(bundles[b], p, ocfg), net));
      rows.push_back(static_cast<Eigen::Index>(b) * P + static_cast<Eigen::Index>(p));
    }
  }
  const auto dim = static_cast<Eigen::Index>(provider.dim());
  Mat E = Mat::Zero(static_cast<Eigen::Index>(bundles.size()) * P, dim);
  if (hashes) hashes->assign(static_cast<std::size_t>(E.rows()), 0);
  auto vecs = cache.lookup(docs, provider);
  for (std::size_t k = 0; k < docs.size(); ++k) {
    E.row(rows[k]) = Eigen::Map<const Eigen::RowVectorXd>(vecs[k]->data(), dim);
    if (hashes) (*hashes)[static_cast<std::size_t>(rows[k])] = docs[k].hash;
  }
  return E;
}

}  // namespace lats::trainer
