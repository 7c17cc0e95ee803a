#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "lats/common/errors.hpp"
#include "lats/common/hash.hpp"
#include "lats/trainer/ppo.hpp"

namespace lats::trainer {

GaeResult compute_gae(const std::vector<double>& r, const std::vector<double>& v, double value_next, double gamma,
                      double lambda, const std::vector<char>& dones) {
  const std::size_t T = r.size();
  if (v.size() != T || (!dones.empty() && dones.size() != T)) throw ShapeError("compute_gae: length mismatch");
  GaeResult out;
  out.advantages.assign(T, 0.0);
  out.returns.assign(T, 0.0);
  double next_adv = 0.0;
  for (std::size_t k = T; k-- > 0;) {
    const double live = (!dones.empty() && dones[k]) ? 0.0 : 1.0;
    const double v_next = (k + 1 == T) ? value_next : v[k + 1];
    const double delta = r[k] + gamma * v_next * live - v[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + v[k];
  }
  return out;
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::max(std::sqrt(var / n), 1e-8);
  for (double& a : adv) a = (a - mean) / sd;
}

PpoTerms ppo_losses(Graph& g, const policy::PolicyOutput& out, const PpoTargets& t, double clip) {
  const Eigen::Index B = out.pi.rows();
  if (static_cast<Eigen::Index>(t.actions.size()) != B || t.log_prob_old.rows() != B || t.advantages.rows() != B ||
      t.returns.rows() != B || t.weight.rows() != B || t.S_next.rows() != B || t.S_next.cols() != out.s_hat.cols() ||
      t.movement_mask.rows() != B || t.movement_mask.cols() * 5 != t.S_next.cols()) {
    throw ShapeError("ppo_losses: target shapes do not match the policy output");
  }
  Var w = g.constant(t.weight);
  PpoTerms p;
  Var lp = nn::pick(out.log_pi, t.actions);
  p.ratio = nn::exp(nn::sub(lp, g.constant(t.log_prob_old)));
  Var A = g.constant(t.advantages);
  Var surrogate = nn::minimum(nn::mul(p.ratio, A), nn::mul(nn::clip(p.ratio, 1.0 - clip, 1.0 + clip), A));
  p.l_pi = nn::scale(nn::sum(nn::mul(surrogate, w)), -1.0);
  p.l_v = nn::sum(nn::mul(nn::square(nn::sub(g.constant(t.returns), out.value)), w));
  Var ent_rows = nn::scale(nn::row_sum(nn::mul(out.pi, out.log_pi)), -1.0);
  p.entropy = nn::sum(nn::mul(ent_rows, w));
  // Per-sample mean over real movement entries, then the sample weights.
  Mat pw(B, t.S_next.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    const double n_real = t.movement_mask.row(b).sum();
    const double scale = n_real > 0 ? t.weight(b, 0) / (5.0 * n_real) : 0.0;
    for (Eigen::Index m = 0; m < t.movement_mask.cols(); ++m) {
      pw.row(b).segment(m * 5, 5).setConstant(t.movement_mask(b, m) * scale);
    }
  }
  p.l_pred = nn::sum(nn::mul(nn::square(nn::sub(out.s_hat, g.constant(t.S_next))), g.constant(pw)));
  return p;
}

MinibatchLoss minibatch_loss(Graph& g, const LatsModel& model, const TrajectoryBatch& batch,
                             const std::vector<std::size_t>& idx, const std::vector<double>& adv,
                             const std::vector<double>& ret, const Mat& noise_s, const Mat& noise_c) {
  const TrainConfig& cfg = model.config();
  const Eigen::Index B = static_cast<Eigen::Index>(idx.size());
  const Eigen::Index P = cfg.p_max, M = cfg.m_max;
  const bool with_e = uses_teacher(cfg.variant) && batch.E.size() > 0;
  if (uses_teacher(cfg.variant) && !with_e) throw ShapeError("batch lacks teacher embeddings for this variant");

  policy::PolicyInput in;
  in.S.resize(B, M * 5);
  in.G.resize(B * P, M);
  in.phase_mask.resize(B, P);
  in.movement_mask.resize(B, M);
  in.h_prev.resize(B, cfg.d);
  Mat I(B, batch.I.cols());
  Mat E;
  if (with_e) E.resize(B * P, batch.E.cols());
  PpoTargets tg;
  tg.log_prob_old.resize(B, 1);
  tg.advantages.resize(B, 1);
  tg.returns.resize(B, 1);
  tg.S_next.resize(B, M * 5);
  tg.weight = Mat::Constant(B, 1, 1.0 / static_cast<double>(B));
  for (Eigen::Index k = 0; k < B; ++k) {
    const std::size_t s = idx[static_cast<std::size_t>(k)];
    const auto r = static_cast<Eigen::Index>(s);
    in.S.row(k) = batch.S.row(r);
    in.G.middleRows(k * P, P) = batch.G.middleRows(r * P, P);
    in.phase_mask.row(k) = batch.phase_mask.row(r);
    in.movement_mask.row(k) = batch.movement_mask.row(r);
    in.h_prev.row(k) = batch.h_in.row(r);
    I.row(k) = batch.I.row(r);
    if (with_e) E.middleRows(k * P, P) = batch.E.middleRows(r * P, P);
    tg.actions.push_back(batch.action[s]);
    tg.log_prob_old(k, 0) = batch.log_prob[s];
    tg.advantages(k, 0) = adv[s];
    tg.returns(k, 0) = ret[s];
    tg.S_next.row(k) = batch.S_next.row(r);
  }
  tg.movement_mask = in.movement_mask;
  Mat X = phase_inputs(in.S, in.G, I, P);

  auto f = model.forward(g, in, X, with_e ? &E : nullptr);
  MinibatchLoss L;
  L.ppo = ppo_losses(g, f.out, tg, cfg.clip);
  Var rl = nn::add(nn::add(L.ppo.l_pi, nn::scale(L.ppo.l_v, cfg.c1)),
                   nn::add(nn::scale(L.ppo.entropy, -cfg.c2), nn::scale(L.ppo.l_pred, cfg.c3)));

  Var zero = g.constant(0.0);
  L.ts = {zero, zero, zero, zero, zero, zero};
  if (cfg.variant != Variant::no_ts) {
    // Each agent-step's phases share its 1/B weight equally.
    Mat rw(B * P, 1);
    for (Eigen::Index k = 0; k < B; ++k) {
      const double n_real = in.phase_mask.row(k).sum();
      for (Eigen::Index p = 0; p < P; ++p) {
        rw(k * P + p, 0) = n_real > 0 ? in.phase_mask(k, p) / (static_cast<double>(B) * n_real) : 0.0;
      }
    }
    ts::TsLossInputs ti;
    ti.x = g.constant(X);
    ti.student = f.student;
    if (with_e) ti.e = g.constant(E);
    ti.teacher = f.teacher;
    ti.noise_s = noise_s;
    ti.noise_c = noise_c;
    ti.weight = rw;
    ts::TsParts parts;
    parts.student = uses_student(cfg.variant);
    parts.teacher = uses_teacher(cfg.variant);
    parts.align = cfg.variant == Variant::full;
    L.ts = ts::ts_loss(g, model.student(), model.teacher(), ti, parts, cfg.ts_weights);
  }
  L.total = nn::add(rl, nn::scale(L.ts.total, cfg.ts_scale));
  return L;
}

namespace {

std::string dump_batch(const std::string& dir, const TrajectoryBatch& b, const std::vector<std::size_t>& idx,
                       const std::vector<double>& adv, const std::vector<double>& ret) {
  std::filesystem::create_directories(dir.empty() ? "." : dir);
  const std::string path = (dir.empty() ? std::string(".") : dir) + "/nonfinite_batch.csv";
  std::ofstream out(path);
  out << "sample,agent,step,action,log_prob_old,value,reward,advantage,return\n";
  out.precision(17);
  for (std::size_t s : idx) {
    out << s << ',' << s % static_cast<std::size_t>(b.n_agents) << ',' << s / static_cast<std::size_t>(b.n_agents)
        << ',' << b.action[s] << ',' << b.log_prob[s] << ',' << b.value[s] << ',' << b.reward[s] << ',' << adv[s]
        << ',' << ret[s] << '\n';
  }
  return path;
}

Mat normal_mat(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

}  // namespace

UpdateReport total_update(LatsModel& model, nn::Adam& opt, const TrajectoryBatch& batch, Rng& rng,
                          const std::string& dump_dir) {
  const TrainConfig& cfg = model.config();
  const std::size_t n = batch.size();
  const auto N = static_cast<std::size_t>(batch.n_agents);
  if (n == 0 || N == 0 || n != N * static_cast<std::size_t>(batch.steps)) throw ShapeError("total_update: empty or ragged batch");

  std::vector<double> adv(n), ret(n);
  for (std::size_t a = 0; a < N; ++a) {
    std::vector<double> r, v;
    for (std::size_t t = 0; t < static_cast<std::size_t>(batch.steps); ++t) {
      r.push_back(batch.reward[t * N + a] * cfg.reward_scale);
      v.push_back(batch.value[t * N + a]);
    }
    GaeResult gr = compute_gae(r, v, batch.bootstrap_value[a], cfg.gamma, cfg.lambda);
    for (std::size_t t = 0; t < r.size(); ++t) {
      adv[t * N + a] = gr.advantages[t];
      ret[t * N + a] = gr.returns[t];
    }
  }
  normalize_advantages(adv);

  UpdateReport rep;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mb = static_cast<std::size_t>(cfg.minibatch);
  const Eigen::Index P = cfg.p_max;
  std::size_t clipped = 0, seen = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += mb) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + mb)));
      const Eigen::Index rows = static_cast<Eigen::Index>(idx.size()) * P;
      Mat ns = normal_mat(rng, rows, cfg.latent), nc = normal_mat(rng, rows, cfg.latent);
      Graph g;
      MinibatchLoss L = minibatch_loss(g, model, batch, idx, adv, ret, ns, nc);
      const double total = L.total.scalar();
      if (!std::isfinite(total)) {
        throw NonFiniteLoss("non-finite loss in update", dump_batch(dump_dir, batch, idx, adv, ret));
      }
      model.params().zero_grad();
      g.backward(L.total);
      const double gn = model.params().clip_grad_norm(cfg.max_grad_norm);
      if (!std::isfinite(gn)) {
        throw NonFiniteLoss("non-finite gradient norm in update", dump_batch(dump_dir, batch, idx, adv, ret));
      }
      opt.step();

      rep.total += total;
      rep.l_pi += L.ppo.l_pi.scalar();
      rep.l_v += L.ppo.l_v.scalar();
      rep.entropy += L.ppo.entropy.scalar();
      rep.l_pred += L.ppo.l_pred.scalar();
      rep.recon_s += L.ts.recon_s.scalar();
      rep.recon_c += L.ts.recon_c.scalar();
      rep.kl_prior_s += L.ts.kl_prior_s.scalar();
      rep.kl_prior_c += L.ts.kl_prior_c.scalar();
      rep.align += L.ts.align.scalar();
      rep.ts_total += L.ts.total.scalar();
      rep.grad_norm += gn;
      const Mat& ratio = L.ppo.ratio.value();
      for (Eigen::Index k = 0; k < ratio.rows(); ++k) clipped += std::abs(ratio(k, 0) - 1.0) > cfg.clip;
      seen += static_cast<std::size_t>(ratio.rows());
      ++rep.minibatches;
    }
  }
  const double m = rep.minibatches;
  for (double* x : {&rep.total, &rep.l_pi, &rep.l_v, &rep.entropy, &rep.l_pred, &rep.recon_s, &rep.recon_c,
                    &rep.kl_prior_s, &rep.kl_prior_c, &rep.align, &rep.ts_total, &rep.grad_norm}) {
    *x /= m;
  }
  rep.clip_fraction = seen ? static_cast<double>(clipped) / static_cast<double>(seen) : 0.0;
  return rep;
}

void write_log_header(std::ostream& out) {
  out << "episode,total,l_pi,l_v,entropy,l_pred,recon_s,recon_c,kl_prior_s,kl_prior_c,align,ts_total,"
         "grad_norm,clip_fraction,mean_reward,provider_texts\n";
}

void write_log_row(std::ostream& out, const TrainLogRow& r) {
  char buf[1024];
  const UpdateReport& u = r.update;
  std::snprintf(buf, sizeof buf,
                "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu\n",
                r.episode, u.total, u.l_pi, u.l_v, u.entropy, u.l_pred, u.recon_s, u.recon_c, u.kl_prior_s,
                u.kl_prior_c, u.align, u.ts_total, u.grad_norm, u.clip_fraction, r.mean_reward, r.provider_texts);
  out << buf;
}

std::vector<TrainLogRow> train(LatsModel& model, const net::NetworkSpec& net, const net::DemandSpec& demand,
                               ts::EmbeddingProvider* provider, const TrainOptions& opt) {
  const TrainConfig& cfg = model.config();
  nn::AdamConfig ac;
  ac.lr = cfg.lr;
  nn::Adam adam(model.params(), ac);
  Rng rng(derive_seed(cfg.seed, 0x7570u));
  std::unique_ptr<ts::EmbeddingCache> cache;
  std::ofstream log;
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    log.open(opt.out_dir + "/train_log.csv");
    if (!log) throw Error("cannot write training log under '" + opt.out_dir + "'");
    write_log_header(log);
  }
  if (uses_teacher(cfg.variant)) {
    if (!provider) throw ProviderError("variant " + to_string(cfg.variant) + " needs an embedding provider");
    cache = std::make_unique<ts::EmbeddingCache>(
        cfg.cache_capacity, opt.out_dir.empty() ? std::string() : opt.out_dir + "/embedding_cache.bin");
  }

  std::vector<TrainLogRow> rows;
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    RolloutOptions ro;
    ro.sim_seed = derive_seed(cfg.seed, 1000u + static_cast<std::uint64_t>(ep));
    ro.action_seed = derive_seed(cfg.seed, 5000000u + static_cast<std::uint64_t>(ep));
    ro.steps = cfg.horizon_s / cfg.decision_s;
    TrajectoryBatch batch = collect_rollout(model, net, demand, ro, provider, cache.get());
    TrainLogRow row;
    row.episode = ep;
    row.update = total_update(model, adam, batch, rng, opt.out_dir);
    row.mean_reward = batch.mean_reward();
    row.provider_texts = cache ? cache->stats().texts_sent : 0;
    rows.push_back(row);
    if (log.is_open()) {
      write_log_row(log, row);
      log.flush();
    }
    if (opt.on_episode) opt.on_episode(row);
    if (!opt.out_dir.empty() && opt.checkpoint_every > 0 && (ep + 1) % opt.checkpoint_every == 0) {
      model.save(opt.out_dir + "/checkpoint_ep" + std::to_string(ep + 1) + ".bin");
    }
  }
  if (!opt.out_dir.empty()) model.save(opt.out_dir + "/checkpoint.bin");
  return rows;
}

}  // namespace lats::trainer
