// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails. Usage: lats_acceptance [--work DIR] [--only NAME]
// The same lines are written to <work>/acceptance_report.txt.
#include <malloc.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lats/baselines/baselines.hpp"
#include "lats/common/errors.hpp"
#include "lats/eval/metrics.hpp"
#include "lats/net/builder.hpp"
#include "lats/net/demand.hpp"
#include "lats/net/network.hpp"
#include "lats/nn/gradcheck.hpp"
#include "lats/nn/layers.hpp"
#include "lats/trainer/controller.hpp"
#include "lats/trainer/ppo.hpp"
#include "lats/ts/vae.hpp"

namespace fs = std::filesystem;
using namespace lats;
using nn::Graph;
using nn::Mat;
using nn::Tensor;
using nn::Var;

namespace {

// Pinned tolerances and budgets.
constexpr double kFdTol = 1e-4;
constexpr double kFdBudgetS = 120.0;
constexpr double kKlTol = 1e-2;
constexpr int kKlPairs = 20;
constexpr int kKlSamples = 1000000;
constexpr int kSimTicks = 1000;
constexpr int kSimSeeds = 20;
constexpr double kFreeFlowDelayS = 1.0;
constexpr int kOracleCases = 1000;
constexpr int kMaskedForwards = 1000;
constexpr double kLearningMargin = 0.10;  // of the fixed-time queue
constexpr int kEvalSeeds = 10;
constexpr double kLearningBudgetS = 4.0 * 3600.0;
constexpr double kInferenceBudgetMs = 1.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char b[256];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

std::string work_dir = "acceptance_work";
const std::string fixtures = LATS_FIXTURE_DIR;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- gradients

std::mt19937_64 grng(99);

Tensor rnd(Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t;
  t.value.resize(r, c);
  for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = u(grng);
  t.grad = Mat::Zero(r, c);
  return t;
}

Var probe(Graph& g, Var y) {
  std::mt19937_64 r(7);
  std::uniform_real_distribution<double> u(-1, 1);
  Mat w(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(r);
  return nn::sum(nn::mul(y, g.constant(w)));
}

// Central differences on a sample of entries of every tensor.
double sampled_fd(const std::function<Var(Graph&)>& f, const std::vector<Tensor*>& params, int per_tensor,
                  std::size_t& checked) {
  for (Tensor* t : params) t->grad.setZero();
  {
    Graph g;
    Var l = f(g);
    g.backward(l);
  }
  std::vector<Mat> analytic;
  for (Tensor* t : params) analytic.push_back(t->grad);
  double worst = 0.0;
  std::mt19937_64 pick(3);
  const double eps = 1e-5;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor* t = params[k];
    const Eigen::Index n = t->value.size();
    std::set<Eigen::Index> idx;
    if (n <= per_tensor) {
      for (Eigen::Index i = 0; i < n; ++i) idx.insert(i);
    } else {
      while (static_cast<int>(idx.size()) < per_tensor) idx.insert(static_cast<Eigen::Index>(pick() % n));
    }
    for (Eigen::Index i : idx) {
      double& x = t->value.data()[i];
      const double keep = x;
      x = keep + eps;
      double lp, lm;
      {
        Graph g(false);
        lp = f(g).scalar();
      }
      x = keep - eps;
      {
        Graph g(false);
        lm = f(g).scalar();
      }
      x = keep;
      const double num = (lp - lm) / (2 * eps);
      const double a = analytic[k].data()[i];
      const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-6});
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  return worst;
}

Outcome gradient_integrity() {
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  auto note = [&](const std::string& name, const nn::GradCheckResult& r) {
    checked += r.checked;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = name;
    }
  };

  Tensor a = rnd(3, 4), b = rnd(3, 4), m = rnd(4, 5), row = rnd(1, 4), col = rnd(3, 1), pos = rnd(3, 4, 0.5, 2.0);
  // Piecewise ops are probed away from their kinks.
  Tensor kinked = rnd(3, 4), other = rnd(3, 4);
  for (Eigen::Index i = 0; i < kinked.value.size(); ++i) {
    double& x = kinked.value.data()[i];
    if (std::abs(x) < 0.05 || std::abs(std::abs(x) - 0.5) < 0.05) x += 0.12;
    if (std::abs(x - other.value.data()[i]) < 0.05) other.value.data()[i] += 0.2;
  }
  using Unary = std::function<Var(Graph&)>;
  const std::vector<std::pair<std::string, Unary>> ops{
      {"matmul", [&](Graph& g) { return nn::matmul(g.param(a), g.param(m)); }},
      {"matmul_nt", [&](Graph& g) { return nn::matmul_nt(g.param(a), g.param(b)); }},
      {"add", [&](Graph& g) { return nn::add(g.param(a), g.param(b)); }},
      {"sub", [&](Graph& g) { return nn::sub(g.param(a), g.param(b)); }},
      {"mul", [&](Graph& g) { return nn::mul(g.param(a), g.param(b)); }},
      {"add_bias", [&](Graph& g) { return nn::add_bias(g.param(a), g.param(row)); }},
      {"mul_rows", [&](Graph& g) { return nn::mul_rows(g.param(a), g.param(col)); }},
      {"scale", [&](Graph& g) { return nn::scale(g.param(a), -2.5); }},
      {"add_scalar", [&](Graph& g) { return nn::add_scalar(g.param(a), 0.3); }},
      {"tanh", [&](Graph& g) { return nn::tanh(g.param(a)); }},
      {"sigmoid", [&](Graph& g) { return nn::sigmoid(g.param(a)); }},
      {"relu", [&](Graph& g) { return nn::relu(g.param(kinked)); }},
      {"exp", [&](Graph& g) { return nn::exp(g.param(a)); }},
      {"log", [&](Graph& g) { return nn::log(g.param(pos)); }},
      {"square", [&](Graph& g) { return nn::square(g.param(a)); }},
      {"minimum", [&](Graph& g) { return nn::minimum(g.param(kinked), g.param(other)); }},
      {"clip", [&](Graph& g) { return nn::clip(g.param(kinked), -0.5, 0.5); }},
      {"sum", [&](Graph& g) { return nn::sum(nn::square(g.param(a))); }},
      {"mean", [&](Graph& g) { return nn::mean(nn::square(g.param(a))); }},
      {"row_sum", [&](Graph& g) { return nn::row_sum(g.param(a)); }},
      {"concat_cols", [&](Graph& g) { return nn::concat_cols({g.param(a), g.param(b), g.param(a)}); }},
      {"slice_cols", [&](Graph& g) { return nn::slice_cols(g.param(a), 1, 2); }},
      {"reshape", [&](Graph& g) { return nn::matmul(nn::reshape(g.param(a), 4, 3), nn::reshape(g.param(b), 3, 4)); }},
      {"repeat_rows", [&](Graph& g) { return nn::repeat_rows(g.param(a), 3); }},
      {"pick", [&](Graph& g) { return nn::pick(g.param(a), {3, 0, 2}); }},
  };
  const std::vector<Tensor*> basic{&a, &b, &m, &row, &col, &pos, &kinked, &other};
  for (const auto& [name, op] : ops) note(name, nn::grad_check([&](Graph& g) { return probe(g, op(g)); }, basic));

  Tensor x6 = rnd(6, 4), logits = rnd(3, 5, -2, 2);
  Mat w = rnd(2, 3).value;
  w(1, 2) = 0.0;
  Mat mask = Mat::Ones(3, 5);
  mask(0, 1) = mask(2, 4) = mask(2, 0) = 0.0;
  note("segment_sum", nn::grad_check([&](Graph& g) { return probe(g, nn::segment_sum(g.param(x6), w)); }, {&x6}));
  note("masked_softmax",
       nn::grad_check([&](Graph& g) { return probe(g, nn::masked_softmax(g.param(logits), mask)); }, {&logits}));
  note("masked_log_softmax",
       nn::grad_check([&](Graph& g) { return probe(g, nn::masked_log_softmax(g.param(logits), mask)); }, {&logits}));

  Tensor x = rnd(2, 3), W = rnd(3, 4), bias = rnd(1, 4);
  note("dense", nn::grad_check([&](Graph& g) { return probe(g, nn::dense(g.param(x), g.param(W), g.param(bias))); },
                               {&x, &W, &bias}));
  {
    nn::ParamStore ps(3);
    nn::GruParams p = nn::GruParams::create(ps, "gru", 5, 4);
    Tensor xi = rnd(2, 5), h = rnd(2, 4);
    auto params = ps.all();
    params.push_back(&xi);
    params.push_back(&h);
    note("gru_cell",
         nn::grad_check([&](Graph& g) { return probe(g, nn::gru_cell(g, g.param(xi), g.param(h), p)); }, params));
  }
  {
    nn::ParamStore ps(5);
    nn::MhaParams p = nn::MhaParams::create(ps, "mha", 4, 4);
    Tensor q = rnd(3, 4), kv = rnd(3, 4), q2 = rnd(4, 4), kv2 = rnd(2, 4);
    Mat qmask(3, 1), qmask2(4, 1);
    qmask << 1, 0, 1;
    qmask2 << 1, 1, 1, 0;
    auto params = ps.all();
    for (Tensor* t : {&q, &kv, &q2, &kv2}) params.push_back(t);
    note("mha_cross",
         nn::grad_check([&](Graph& g) { return probe(g, nn::mha_cross(g, g.param(q), g.param(kv), p, qmask)); },
                        params));
    note("mha_cross_single_kv", nn::grad_check(
                                    [&](Graph& g) {
                                      return probe(g, nn::mha_cross_single_kv(g, g.param(q2), g.param(kv2), p, qmask2));
                                    },
                                    params));
  }
  {
    Tensor mu = rnd(2, 3), lv = rnd(2, 3), mu2 = rnd(2, 3), lv2 = rnd(2, 3);
    Mat noise = rnd(2, 3).value;
    note("reparam_sample",
         nn::grad_check([&](Graph& g) { return probe(g, nn::reparam_sample(g.param(mu), g.param(lv), noise)); },
                        {&mu, &lv}));
    note("gaussian_kl_rows", nn::grad_check(
                                 [&](Graph& g) {
                                   return probe(g, ts::gaussian_kl_rows(g.param(mu), g.param(lv), g.param(mu2),
                                                                         g.param(lv2)));
                                 },
                                 {&mu, &lv, &mu2, &lv2}));
    note("kl_to_standard_rows", nn::grad_check(
                                    [&](Graph& g) { return probe(g, ts::kl_to_standard_rows(g.param(mu), g.param(lv))); },
                                    {&mu, &lv}));
  }

  // End-to-end joint loss at the default architecture on a real rollout.
  // The teacher is a constant inside the alignment term, so its parameters
  // are differentiated with that term switched off.
  net::NetworkSpec grid = net::build_grid(2, 2);
  net::DemandSpec dem = net::grid_demand(grid, "high");
  for (bool teacher_side : {false, true}) {
    trainer::TrainConfig cfg;
    cfg.head_gain = 1.0;
    if (teacher_side) cfg.ts_weights.align = 0.0;
    trainer::LatsModel model(cfg);
    ts::HashEmbedProvider prov;
    ts::EmbeddingCache cache;
    trainer::RolloutOptions ro;
    ro.sim_seed = 4;
    ro.action_seed = 5;
    ro.steps = 12;
    auto batch = trainer::collect_rollout(model, grid, dem, ro, &prov, &cache);
    const std::vector<std::size_t> idx{1, 6, 17, 42};
    std::vector<double> adv(batch.size()), ret(batch.size());
    std::mt19937_64 r(8);
    std::normal_distribution<double> n01;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      adv[k] = n01(r);
      ret[k] = n01(r);
    }
    const Eigen::Index rows = static_cast<Eigen::Index>(idx.size()) * cfg.p_max;
    Mat ns(rows, cfg.latent), nc(rows, cfg.latent);
    for (Eigen::Index k = 0; k < ns.size(); ++k) ns.data()[k] = n01(r);
    for (Eigen::Index k = 0; k < nc.size(); ++k) nc.data()[k] = n01(r);
    // Push old log-probs off the current policy so ratios are not all 1.
    for (std::size_t k : idx) batch.log_prob[k] -= 0.05;
    std::vector<Tensor*> params;
    for (Tensor* t : model.params().all()) {
      if ((t->name.rfind("ts.teacher.", 0) == 0) == teacher_side) params.push_back(t);
    }
    auto f = [&](Graph& g) { return trainer::minibatch_loss(g, model, batch, idx, adv, ret, ns, nc).total; };
    std::size_t n = 0;
    const double e = sampled_fd(f, params, 12, n);
    checked += n;
    if (e > worst) {
      worst = e;
      worst_name = teacher_side ? "joint loss (teacher)" : "joint loss (policy+student)";
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst < kFdTol && secs < kFdBudgetS;
  o.detail = "max rel err " + fmt("%.2e", worst) + " (" + worst_name + ") over " + std::to_string(checked) +
             " entries in " + fmt("%.1f", secs) + " s; need < " + fmt("%.0e", kFdTol) + " within " +
             fmt("%.0f", kFdBudgetS) + " s";
  return o;
}

// ---------------------------------------------------------------------- KL

Outcome kl_correctness() {
  std::mt19937_64 r(2024);
  std::uniform_real_distribution<double> mu_d(-1.0, 1.0), lv_d(-1.0, 1.0);
  std::normal_distribution<double> n01;
  double worst = 0.0, self_max = 0.0;
  const int dim = 3;
  for (int p = 0; p < kKlPairs; ++p) {
    ts::LatentGaussian a, b;
    a.mu.resize(dim);
    a.logvar.resize(dim);
    b.mu.resize(dim);
    b.logvar.resize(dim);
    for (int k = 0; k < dim; ++k) {
      a.mu[k] = mu_d(r);
      a.logvar[k] = lv_d(r);
      b.mu[k] = mu_d(r);
      b.logvar[k] = lv_d(r);
    }
    // Monte Carlo E_a[log a(x) - log b(x)].
    double acc = 0.0;
    for (int s = 0; s < kKlSamples; ++s) {
      double la = 0.0, lb = 0.0;
      for (int k = 0; k < dim; ++k) {
        const double sa = std::exp(0.5 * a.logvar[k]);
        const double xk = a.mu[k] + sa * n01(r);
        const double za = (xk - a.mu[k]) / sa;
        const double zb = (xk - b.mu[k]) / std::exp(0.5 * b.logvar[k]);
        la += -0.5 * a.logvar[k] - 0.5 * za * za;
        lb += -0.5 * b.logvar[k] - 0.5 * zb * zb;
      }
      acc += la - lb;
    }
    worst = std::max(worst, std::abs(acc / kKlSamples - ts::gaussian_kl(a, b)));
    self_max = std::max(self_max, std::abs(ts::gaussian_kl(a, a)));
  }

  // Alignment gradient on the teacher side.
  nn::ParamStore ps(12);
  ts::Vae student(ps, "ts.student", 7, 6, 3), teacher(ps, "ts.teacher", 5, 6, 3);
  Tensor xs = rnd(4, 7), es = rnd(4, 5);
  Graph g;
  ts::TsLossInputs in;
  in.x = g.constant(xs.value);
  in.e = g.constant(es.value);
  in.student = student.encode(g, in.x);
  in.teacher = teacher.encode(g, in.e);
  in.noise_s = rnd(4, 3).value;
  in.noise_c = rnd(4, 3).value;
  in.weight = Mat::Constant(4, 1, 0.25);
  ts::TsWeights only_align;
  only_align.recon_s = only_align.recon_c = only_align.kl_prior_s = only_align.kl_prior_c = 0.0;
  auto terms = ts::ts_loss(g, student, teacher, in, ts::TsParts{}, only_align);
  ps.zero_grad();
  g.backward(terms.total);
  double teacher_grad = 0.0, student_grad = 0.0;
  for (Tensor* t : ps.with_prefix("ts.teacher.")) teacher_grad = std::max(teacher_grad, t->grad.cwiseAbs().maxCoeff());
  for (Tensor* t : ps.with_prefix("ts.student.")) student_grad = std::max(student_grad, t->grad.cwiseAbs().maxCoeff());

  Outcome o;
  o.pass = worst < kKlTol && self_max == 0.0 && teacher_grad == 0.0 && student_grad > 0.0 && terms.align.scalar() > 0.0;
  o.detail = "max |closed-form - MC| " + fmt("%.2e", worst) + " over " + std::to_string(kKlPairs) + " pairs x " +
             std::to_string(kKlSamples) + " samples (need < " + fmt("%.0e", kKlTol) + "); max KL(a,a) " +
             fmt("%g", self_max) + "; max |d align / d teacher| " + fmt("%g", teacher_grad) +
             " (student side " + fmt("%.2e", student_grad) + ")";
  return o;
}

// --------------------------------------------------------------- simulator

Outcome simulator_laws() {
  net::NetworkSpec grid = net::build_grid(2, 2);
  net::DemandSpec dem = net::grid_demand(grid, "high");
  std::size_t violations = 0, mismatched = 0;
  for (int seed = 1; seed <= kSimSeeds; ++seed) {
    std::vector<double> traces[2];
    for (int rep = 0; rep < 2; ++rep) {
      sim::Simulator s(grid, dem, static_cast<std::uint64_t>(seed));
      std::mt19937_64 r(static_cast<std::uint64_t>(seed) * 7919u);
      for (int t = 0; t < kSimTicks; ++t) {
        if (r() % 10 == 0) {
          const std::size_t i = r() % grid.intersections.size();
          s.apply_phase(i, r() % grid.intersections[i].phases.size());
        }
        s.step();
        const auto c = s.conservation();
        if (c.inserted != c.active + c.completed || s.requested() != c.inserted + c.pending) ++violations;
        for (const auto& v : s.vehicles()) {
          traces[rep].push_back(v.position);
          traces[rep].push_back(v.speed);
        }
      }
    }
    if (traces[0].size() != traces[1].size() ||
        std::memcmp(traces[0].data(), traces[1].data(), traces[0].size() * sizeof(double)) != 0) {
      ++mismatched;
    }
  }

  // Free flow: under all-green control, one vehicle per (origin, exit side),
  // departures spaced so no two vehicles share the network.
  net::DemandSpec sparse;
  double start = 0.0;
  for (std::size_t r : grid.origin_roads()) {
    for (std::size_t d : grid.destination_roads()) {
      if (grid.roads[d].to[0] == grid.roads[r].from[0]) continue;  // same side
      sparse.flows.push_back({grid.roads[r].id, grid.roads[d].id, start, start + 1.0, 3600.0});
      start += 120.0;
      if (start > 3000.0) break;
    }
    if (start > 3000.0) break;
  }
  eval::EvalConfig ec;
  ec.sim.all_green = true;
  baselines::FixedTimeController ft;
  eval::MetricsTrace tr = eval::run_episode(ft, grid, sparse, 3, ec);
  double worst = 0.0;
  std::size_t finished = 0;
  for (const auto& trip : tr.trips) {
    if (!trip.arrive_s) continue;
    ++finished;
    worst = std::max(worst, std::abs(eval::trip_delay(trip)));
  }
  Outcome o;
  o.pass = violations == 0 && mismatched == 0 && finished == tr.trips.size() && finished > 0 &&
           worst <= kFreeFlowDelayS;
  o.detail = std::to_string(violations) + " conservation violations over " + std::to_string(kSimTicks) + " ticks x " +
             std::to_string(kSimSeeds) + " seeds; " + std::to_string(mismatched) + " non-identical replays; " +
             "free-flow max |trip delay| " + fmt("%.3f", worst) + " s over " + std::to_string(finished) +
             " trips (need <= " + fmt("%.0f", kFreeFlowDelayS) + " s)";
  return o;
}

// ----------------------------------------------------------------- oracles

std::size_t brute_force(const net::NetworkSpec& n, std::size_t i, const baselines::Readings& r, bool pressure) {
  long best_score = 0;
  std::size_t best = 0;
  for (std::size_t p = 0; p < n.intersections[i].phases.size(); ++p) {
    long s = 0;
    std::set<std::string> lanes;
    for (const std::string& mid : n.intersections[i].phases[p].movement_ids) {
      const auto& mv = n.movements[*n.find_movement(mid)];
      const int in = r.at(*n.find_lane(mv.in_lane)).stopped;
      const int out = r.at(*n.find_lane(mv.out_lane)).stopped;
      if (pressure) {
        s += in - out;
      } else if (lanes.insert(mv.in_lane).second) {
        s += in;
      }
    }
    if (p == 0 || s > best_score) {
      best_score = s;
      best = p;
    }
  }
  return best;
}

Outcome controller_oracles() {
  net::NetworkSpec het = net::load_network_file(fixtures + "/hetero28.json");
  std::mt19937_64 r(77);
  std::uniform_int_distribution<int> count(0, 6);
  std::bernoulli_distribution sparse(0.35);
  std::size_t disagree = 0;
  sim::Simulator s(het, {}, 1);
  for (int k = 0; k < kOracleCases; ++k) {
    const std::size_t i = static_cast<std::size_t>(k) % het.intersections.size();
    auto rd = s.read_detectors(i);
    for (auto& [lane, v] : rd) v.stopped = sparse(r) ? count(r) : 0;
    if (baselines::greedy(het, i, rd) != brute_force(het, i, rd, false)) ++disagree;
    if (baselines::max_pressure(het, i, rd) != brute_force(het, i, rd, true)) ++disagree;
  }

  policy::PolicyConfig pc;
  nn::ParamStore ps(17);
  policy::Policy pol(ps, pc);
  std::uniform_int_distribution<int> np(1, pc.p_max), nm(1, pc.m_max);
  std::uniform_real_distribution<double> u(0.0, 1.0), z(-3.0, 3.0);
  std::size_t leaked = 0, forwards = 0;
  for (int k = 0; k < kMaskedForwards; ++k) {
    const Eigen::Index B = 2;
    policy::PolicyInput in;
    in.S = Mat::Zero(B, pc.m_max * 5);
    in.G = Mat::Zero(B * pc.p_max, pc.m_max);
    in.phase_mask = Mat::Zero(B, pc.p_max);
    in.movement_mask = Mat::Zero(B, pc.m_max);
    in.h_prev = Mat::Zero(B, pc.d);
    for (Eigen::Index b = 0; b < B; ++b) {
      const int P = np(r), M = nm(r);
      for (int m = 0; m < M; ++m) {
        in.movement_mask(b, m) = 1.0;
        for (int f = 0; f < 5; ++f) in.S(b, m * 5 + f) = u(r);
      }
      for (int p = 0; p < P; ++p) {
        in.phase_mask(b, p) = 1.0;
        for (int m = 0; m < M; ++m) in.G(b * pc.p_max + p, m) = u(r) < 0.3 ? 1.0 : 0.0;
      }
      for (Eigen::Index j = 0; j < pc.d; ++j) in.h_prev(b, j) = z(r) / 3.0;
    }
    Mat zm(B * pc.p_max, pc.latent);
    for (Eigen::Index j = 0; j < zm.size(); ++j) zm.data()[j] = z(r);
    Graph g(false);
    auto out = pol.forward(g, in, g.constant(zm));
    ++forwards;
    for (Eigen::Index b = 0; b < B; ++b)
      for (Eigen::Index p = 0; p < pc.p_max; ++p)
        if (in.phase_mask(b, p) == 0.0 && out.pi.value()(b, p) != 0.0) ++leaked;
  }
  Outcome o;
  o.pass = disagree == 0 && leaked == 0;
  o.detail = std::to_string(disagree) + " disagreements with exhaustive argmax on " + std::to_string(kOracleCases) +
             " snapshots (greedy and max-pressure); " + std::to_string(leaked) + " non-zero masked probabilities in " +
             std::to_string(forwards) + " forwards";
  return o;
}

// ---------------------------------------------------------------- learning

struct LearningState {
  bool trained = false;
  std::string full_ckpt;
};
LearningState learning;

double eval_queue(eval::Controller& c, const net::NetworkSpec& n, const net::DemandSpec& d) {
  std::vector<eval::MetricsTrace> traces;
  for (int s = 1; s <= kEvalSeeds; ++s) traces.push_back(eval::run_episode(c, n, d, static_cast<std::uint64_t>(s)));
  return eval::summarize(traces).mean.queue;
}

Outcome desk_learning() {
  auto t0 = std::chrono::steady_clock::now();
  net::NetworkSpec grid = net::load_network_file(fixtures + "/grid2x2.json");
  net::DemandSpec dem = net::load_demand_file(fixtures + "/grid2x2_medium.json");
  trainer::TrainConfig base = trainer::load_config_file(fixtures + "/desk.json");
  ts::HashEmbedProvider prov;

  auto train_variant = [&](trainer::Variant v) {
    trainer::TrainConfig cfg = base;
    cfg.variant = v;
    auto model = std::make_unique<trainer::LatsModel>(cfg);
    trainer::TrainOptions opt;
    opt.out_dir = work_dir + "/desk_" + trainer::to_string(v);
    fs::remove_all(opt.out_dir);
    auto t1 = std::chrono::steady_clock::now();
    opt.on_episode = [&](const trainer::TrainLogRow& r) {
      if ((r.episode + 1) % 25 == 0) {
        std::fprintf(stderr, "  [%s] episode %d/%d mean reward %.3f (%.0f s)\n", trainer::to_string(v).c_str(),
                     r.episode + 1, cfg.episodes, r.mean_reward, seconds_since(t1));
      }
    };
    trainer::train(*model, grid, dem, v == trainer::Variant::no_ts ? nullptr : &prov, opt);
    return std::make_pair(std::move(model), opt.out_dir + "/checkpoint.bin");
  };
  auto [full, full_ckpt] = train_variant(trainer::Variant::full);
  auto [nots, nots_ckpt] = train_variant(trainer::Variant::no_ts);
  learning.trained = true;
  learning.full_ckpt = full_ckpt;

  baselines::FixedTimeController ft;
  trainer::LatsController c_full(*full), c_nots(*nots);
  const double q_fixed = eval_queue(ft, grid, dem);
  const double q_full = eval_queue(c_full, grid, dem);
  const double q_nots = eval_queue(c_nots, grid, dem);
  const double secs = seconds_since(t0);
  const double margin = kLearningMargin * q_fixed;
  Outcome o;
  o.pass = q_full < q_fixed - margin && q_full < q_nots - margin && secs < kLearningBudgetS;
  o.detail = "mean queue over " + std::to_string(kEvalSeeds) + " seeds: full " + fmt("%.3f", q_full) + ", fixed-time " +
             fmt("%.3f", q_fixed) + ", no_ts " + fmt("%.3f", q_nots) + "; required gap " + fmt("%.3f", margin) +
             " below both; " + std::to_string(base.episodes) + " episodes per variant, total " + fmt("%.0f", secs) +
             " s (budget " + fmt("%.0f", kLearningBudgetS) + " s)";
  return o;
}

Outcome transfer_smoke() {
  if (!learning.trained) {
    return {false, "needs the grid checkpoint from the learning run, which did not run"};
  }
  auto model = trainer::LatsModel::load(learning.full_ckpt);
  net::NetworkSpec het = net::load_network_file(fixtures + "/hetero28.json");
  net::DemandSpec dem = net::load_demand_file(fixtures + "/hetero28_demand.json");
  trainer::LatsController c(*model);
  int completed = 0;
  double queue = 0.0;
  std::string error;
  try {
    for (int s = 1; s <= kEvalSeeds; ++s) {
      auto t = eval::run_episode(c, het, dem, static_cast<std::uint64_t>(s));
      if (t.steps.size() == 360) ++completed;
      queue += eval::episode_metrics(t).queue / kEvalSeeds;
    }
  } catch (const std::exception& e) {
    error = e.what();
  }
  Outcome o;
  o.pass = error.empty() && completed == kEvalSeeds;
  o.detail = std::to_string(completed) + "/" + std::to_string(kEvalSeeds) + " episodes of 360 decisions on " +
             std::to_string(het.intersections.size()) + " intersections" +
             (error.empty() ? "; mean queue " + fmt("%.3f", queue) : "; error: " + error);
  return o;
}

// --------------------------------------------------------------- inference

Outcome inference_budget() {
  net::NetworkSpec grid = net::load_network_file(fixtures + "/grid2x2.json");
  net::DemandSpec dem = net::load_demand_file(fixtures + "/grid2x2_medium.json");
  trainer::TrainConfig cfg;
  trainer::LatsModel model(cfg);
  trainer::LatsController c(model);
  sim::Simulator s(grid, dem, 3);
  c.reset(3);
  double total = 0.0;
  int decisions = 0;
  for (int step = 0; step < 360; ++step) {
    auto t0 = std::chrono::steady_clock::now();
    auto a = c.decide(s, step);
    total += seconds_since(t0);
    decisions += static_cast<int>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) s.apply_phase(i, a[i]);
    for (int k = 0; k < 10; ++k) s.step();
  }
  const double ms = 1e3 * total / decisions;
  Outcome o;
  o.pass = ms < kInferenceBudgetMs;
  o.detail = fmt("%.4f", ms) + " ms per agent-step (encode + student encoder + policy) over " +
             std::to_string(decisions) + " decisions; budget " + fmt("%.1f", kInferenceBudgetMs) + " ms";
  return o;
}

// --------------------------------------------------------- reproducibility

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  net::NetworkSpec grid = net::load_network_file(fixtures + "/grid2x2.json");
  net::DemandSpec dem = net::load_demand_file(fixtures + "/grid2x2_medium.json");
  trainer::TrainConfig cfg = trainer::load_config_file(fixtures + "/smoke.json");
  std::string logs[2];
  for (int k = 0; k < 2; ++k) {
    trainer::LatsModel model(cfg);
    ts::HashEmbedProvider prov;
    trainer::TrainOptions opt;
    opt.out_dir = work_dir + "/smoke_" + std::to_string(k);
    fs::remove_all(opt.out_dir);
    trainer::train(model, grid, dem, &prov, opt);
    logs[k] = slurp(opt.out_dir + "/train_log.csv");
  }
  const long rows = std::count(logs[0].begin(), logs[0].end(), '\n') - 1;
  // Least-squares slope of mean_reward per episode; reported, not gated.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  std::istringstream lines(logs[0]);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::istringstream cs(line);
    for (std::string c; std::getline(cs, c, ',');) cells.push_back(c);
    if (cells.size() < 15) continue;
    const double x = std::stod(cells[0]), y = std::stod(cells[14]);
    sx += x, sy += y, sxx += x * x, sxy += x * y, n += 1;
  }
  const double slope = n > 1 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
  Outcome o;
  o.pass = !logs[0].empty() && logs[0] == logs[1] && rows == cfg.episodes;
  o.detail = std::string(logs[0] == logs[1] ? "identical" : "different") + " training CSVs from two seed-" +
             std::to_string(cfg.seed) + " smoke runs (" + std::to_string(rows) + " rows, " +
             std::to_string(logs[0].size()) + " bytes), reward slope " + fmt("%+.3f", slope) + "/episode";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
  std::string only;
  for (int k = 1; k < argc; ++k) {
    const std::string a = argv[k];
    if (a == "--work" && k + 1 < argc) {
      work_dir = argv[++k];
    } else if (a == "--only" && k + 1 < argc) {
      only = argv[++k];
    } else {
      std::fprintf(stderr, "usage: %s [--work DIR] [--only NAME]\n", argv[0]);
      return 2;
    }
  }
  fs::create_directories(work_dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient-integrity", gradient_integrity},
      {"vae-kl-correctness", kl_correctness},
      {"simulator-laws", simulator_laws},
      {"controller-oracles", controller_oracles},
      {"desk-scale-learning", desk_learning},
      {"transfer-smoke", transfer_smoke},
      {"inference-budget", inference_budget},
      {"reproducibility", reproducibility},
  };
  std::ofstream report(work_dir + "/acceptance_report.txt");
  auto emit = [&](const std::string& line) {
    std::fputs(line.c_str(), stdout);
    std::fflush(stdout);
    report << line << std::flush;
  };
  int passed = 0, run = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && name.find(only) == std::string::npos) continue;
    ++run;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    passed += o.pass;
    char tail[64];
    std::snprintf(tail, sizeof tail, " [%.1f s]\n", seconds_since(t0));
    char head[32];
    std::snprintf(head, sizeof head, "%s %-20s ", o.pass ? "PASS" : "FAIL", name.c_str());
    emit(head + o.detail + tail);
  }
  emit(std::to_string(passed) + "/" + std::to_string(run) + " criteria passed\n");
  return passed == run ? 0 : 1;
}
