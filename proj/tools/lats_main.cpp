#include <malloc.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lats/baselines/baselines.hpp"
#include "lats/common/errors.hpp"
#include "lats/eval/metrics.hpp"
#include "lats/net/demand.hpp"
#include "lats/net/network.hpp"
#include "lats/trainer/controller.hpp"
#include "lats/trainer/ppo.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace lats;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string net_path;
  std::string demand_path;
  std::string provider = "hash";
  std::string out;
};

struct TrainArgs {
  Common io;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::string variant;
  int checkpoint_every = 0;
};

struct EvalArgs {
  Common io;
  std::string checkpoint;
  std::string baseline;
  int seeds = 10;
  std::uint64_t seed_base = 1;
  std::string mode = "argmax";
  bool traces = false;
  bool phase_features = false;
  std::string label;
};

// Large matrices are allocated and freed on every step; keeping them on the
// heap instead of fresh mappings removes most of the kernel time.
void tune_allocator() {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ArgumentError(what + " is required");
  if (!fs::is_regular_file(path)) throw ArgumentError(what + " '" + path + "' does not exist");
}

std::string invocation(int argc, char** argv) {
  std::string s;
  for (int k = 0; k < argc; ++k) {
    if (k) s += ' ';
    s += argv[k];
  }
  return s;
}

class Manifest {
 public:
  Manifest(std::string out, std::string command, std::string line) : out_(std::move(out)) {
    doc_["command"] = std::move(command);
    doc_["invocation"] = std::move(line);
    doc_["files"] = json::array();
    start_ = std::chrono::steady_clock::now();
  }
  json& operator[](const char* k) { return doc_[k]; }
  void add_file(const std::string& path) { doc_["files"].push_back(fs::path(path).lexically_relative(out_).string()); }
  void write() {
    doc_["elapsed_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream f(out_ + "/manifest.json");
    if (!f) throw Error("cannot write manifest under '" + out_ + "'");
    f << doc_.dump(2) << '\n';
  }

 private:
  std::string out_;
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

struct Inputs {
  net::NetworkSpec net;
  net::DemandSpec demand;
};

Inputs load_inputs(const Common& io) {
  require_file(io.net_path, "--net");
  require_file(io.demand_path, "--demand");
  if (io.out.empty()) throw ArgumentError("--out is required");
  Inputs in{net::load_network_file(io.net_path), net::load_demand_file(io.demand_path)};
  net::validate_demand(in.demand, in.net);
  fs::create_directories(io.out);
  return in;
}

trainer::TrainConfig resolve_config(const TrainArgs& a) {
  trainer::TrainConfig cfg;
  if (!a.config_path.empty()) {
    require_file(a.config_path, "--config");
    cfg = trainer::load_config_file(a.config_path);
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.episodes) cfg.episodes = *a.episodes;
  if (!a.variant.empty()) cfg.variant = trainer::variant_from_string(a.variant);
  cfg.validate();
  return cfg;
}

std::unique_ptr<trainer::LatsModel> run_train(const TrainArgs& a, const std::string& command,
                                              const std::string& line) {
  trainer::TrainConfig cfg = resolve_config(a);
  Inputs in = load_inputs(a.io);
  std::unique_ptr<ts::EmbeddingProvider> provider;
  if (trainer::uses_teacher(cfg.variant)) provider = ts::make_provider(a.io.provider);
  const std::size_t e_dim = provider ? provider->dim() : ts::kEmbeddingDim;
  auto model = std::make_unique<trainer::LatsModel>(cfg, e_dim);

  Manifest m(a.io.out, command, line);
  m["seed"] = cfg.seed;
  m["variant"] = trainer::to_string(cfg.variant);
  m["provider"] = provider ? provider->tag() : "none";
  m["net"] = a.io.net_path;
  m["demand"] = a.io.demand_path;
  {
    std::ofstream f(a.io.out + "/config.json");
    f << trainer::render_config(cfg) << '\n';
  }
  m.add_file(a.io.out + "/config.json");

  trainer::TrainOptions opt;
  opt.out_dir = a.io.out;
  opt.checkpoint_every = a.checkpoint_every;
  opt.on_episode = [&](const trainer::TrainLogRow& r) {
    std::fprintf(stderr, "episode %d/%d reward %.3f loss %.4f entropy %.3f\n", r.episode + 1, cfg.episodes,
                 r.mean_reward, r.update.total, r.update.entropy);
  };
  auto rows = trainer::train(*model, in.net, in.demand, provider.get(), opt);
  m.add_file(a.io.out + "/train_log.csv");
  m.add_file(a.io.out + "/checkpoint.bin");
  if (fs::exists(a.io.out + "/embedding_cache.bin")) m.add_file(a.io.out + "/embedding_cache.bin");
  for (int k = a.checkpoint_every; a.checkpoint_every > 0 && k <= cfg.episodes; k += a.checkpoint_every) {
    m.add_file(a.io.out + "/checkpoint_ep" + std::to_string(k) + ".bin");
  }
  m["episodes"] = rows.size();
  if (!rows.empty()) m["final_mean_reward"] = rows.back().mean_reward;
  m.write();
  return model;
}

// Records phase features from the wrapped controller's first episode.
class FeatureTap : public eval::Controller {
 public:
  FeatureTap(trainer::LatsController& inner, std::ostream& out) : inner_(inner), out_(out) {}
  std::string name() const override { return inner_.name(); }
  void reset(std::uint64_t seed) override { inner_.reset(seed); }
  std::vector<std::size_t> decide(const sim::Simulator& sim, int step) override {
    auto a = inner_.decide(sim, step);
    const auto& net = sim.network();
    const Eigen::Index P = inner_.last_features().rows() / static_cast<Eigen::Index>(net.intersections.size());
    for (std::size_t i = 0; i < net.intersections.size(); ++i) {
      policy::export_phase_features(out_, step, net.intersections[i].id,
                                    inner_.last_features().middleRows(static_cast<Eigen::Index>(i) * P, P),
                                    net.intersections[i].phases.size(), header_);
      header_ = false;
    }
    return a;
  }

 private:
  trainer::LatsController& inner_;
  std::ostream& out_;
  bool header_ = true;
};

policy::ActionMode parse_mode(const std::string& s) {
  if (s == "argmax") return policy::ActionMode::argmax;
  if (s == "sample") return policy::ActionMode::sample;
  throw ArgumentError("--mode must be argmax or sample");
}

void run_eval(const EvalArgs& a, const trainer::LatsModel* trained, const std::string& command,
              const std::string& line) {
  if (a.seeds < 1) throw ArgumentError("--seeds must be positive");
  const policy::ActionMode mode = parse_mode(a.mode);
  std::unique_ptr<trainer::LatsModel> loaded;
  std::unique_ptr<eval::Controller> baseline;
  if (!trained && a.checkpoint.empty() == a.baseline.empty()) {
    throw ArgumentError("give exactly one of --checkpoint or --baseline");
  }
  if (!trained && !a.checkpoint.empty()) {
    require_file(a.checkpoint, "--checkpoint");
    loaded = trainer::LatsModel::load(a.checkpoint);
    trained = loaded.get();
  }
  if (!trained) baseline = baselines::make_baseline(a.baseline);
  Inputs in = load_inputs(a.io);

  std::unique_ptr<ts::EmbeddingProvider> provider;
  std::unique_ptr<trainer::LatsController> lats;
  if (trained) {
    if (trainer::policy_needs_provider(trained->variant())) provider = ts::make_provider(a.io.provider);
    lats = std::make_unique<trainer::LatsController>(*trained, mode, provider.get(), trained->config().cache_capacity);
  }
  eval::Controller& ctrl = lats ? static_cast<eval::Controller&>(*lats) : *baseline;

  Manifest m(a.io.out, command, line);
  m["net"] = a.io.net_path;
  m["demand"] = a.io.demand_path;
  m["controller"] = ctrl.name();
  m["mode"] = a.mode;
  if (trained) m["variant"] = trainer::to_string(trained->variant());
  if (!a.checkpoint.empty()) m["checkpoint"] = a.checkpoint;
  m["provider"] = provider ? provider->tag() : "none";

  std::vector<eval::MetricsTrace> traces;
  std::vector<std::uint64_t> seeds;
  std::ofstream features;
  if (a.phase_features && lats) {
    features.open(a.io.out + "/phase_features.csv");
    m.add_file(a.io.out + "/phase_features.csv");
  }
  if (a.traces) fs::create_directories(a.io.out + "/traces");
  for (int k = 0; k < a.seeds; ++k) {
    const std::uint64_t seed = a.seed_base + static_cast<std::uint64_t>(k);
    seeds.push_back(seed);
    eval::MetricsTrace t;
    if (k == 0 && features.is_open()) {
      FeatureTap tap(*lats, features);
      t = eval::run_episode(tap, in.net, in.demand, seed);
    } else {
      t = eval::run_episode(ctrl, in.net, in.demand, seed);
    }
    std::fprintf(stderr, "seed %llu: queue %.3f\n", static_cast<unsigned long long>(seed),
                 eval::episode_metrics(t).queue);
    if (a.traces) {
      const std::string p = a.io.out + "/traces/seed_" + std::to_string(seed) + ".csv";
      std::ofstream f(p);
      eval::export_trace_csv(f, t);
      m.add_file(p);
    }
    traces.push_back(std::move(t));
  }
  eval::MetricsReport rep = eval::summarize(traces, a.label.empty() ? ctrl.name() : a.label);
  if (trained) rep.metadata = "variant=" + trainer::to_string(trained->variant());
  {
    std::ofstream f(a.io.out + "/report.csv");
    eval::export_report_csv(f, {rep});
  }
  m.add_file(a.io.out + "/report.csv");
  m["seeds"] = seeds;
  json summary;
  for (int k = 0; k < eval::kMetricCount; ++k) {
    summary[eval::kMetricNames[k]] = {{"mean", eval::metric_value(rep.mean, k)},
                                      {"std", eval::metric_value(rep.std, k)}};
  }
  m["metrics"] = summary;
  m.write();
  std::printf("%s queue %s\n", rep.method.c_str(),
              eval::format_mean_std(rep.mean.queue, rep.std.queue).c_str());
}

void add_common(CLI::App* c, Common& io) {
  c->add_option("--net", io.net_path, "Network JSON")->required();
  c->add_option("--demand", io.demand_path, "Demand JSON")->required();
  c->add_option("--provider", io.provider, "Embedding provider: hash or http:<url>");
  c->add_option("--out", io.out, "Output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Traffic signal control with language-assisted teacher-student training"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a policy");
  add_common(c_train, train.io);
  c_train->add_option("--config", train.config_path, "Training config JSON");
  c_train->add_option("--seed", train.seed, "Overrides the config seed");
  c_train->add_option("--episodes", train.episodes, "Overrides the config episode budget");
  c_train->add_option("--checkpoint-every", train.checkpoint_every, "Extra checkpoint every N episodes");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint or a classical controller");
  add_common(c_eval, ev.io);
  c_eval->add_option("--checkpoint", ev.checkpoint, "Trained model");
  c_eval->add_option("--baseline", ev.baseline, "fixed_time, greedy or max_pressure");
  c_eval->add_option("--seeds", ev.seeds, "Number of seeded episodes");
  c_eval->add_option("--seed", ev.seed_base, "First episode seed");
  c_eval->add_option("--mode", ev.mode, "argmax or sample");
  c_eval->add_flag("--traces", ev.traces, "Write per-step trace CSV per seed");
  c_eval->add_flag("--phase-features", ev.phase_features, "Write fused phase features of the first episode");
  c_eval->add_option("--label", ev.label, "Method name in the report");

  TrainArgs ab;
  EvalArgs ab_eval;
  std::string ab_eval_net, ab_eval_demand;
  auto* c_ab = app.add_subcommand("ablate", "Train one variant and evaluate it");
  add_common(c_ab, ab.io);
  c_ab->add_option("--variant", ab.variant, "full, no_t, no_s or no_ts")->required();
  c_ab->add_option("--config", ab.config_path, "Training config JSON");
  c_ab->add_option("--seed", ab.seed, "Overrides the config seed");
  c_ab->add_option("--episodes", ab.episodes, "Overrides the config episode budget");
  c_ab->add_option("--seeds", ab_eval.seeds, "Evaluation episodes");
  c_ab->add_option("--eval-seed", ab_eval.seed_base, "First evaluation seed");
  c_ab->add_option("--eval-net", ab_eval_net, "Evaluate on this network instead");
  c_ab->add_option("--eval-demand", ab_eval_demand, "Evaluate on this demand instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const std::string line = invocation(argc, argv);
  try {
    if (*c_train) {
      run_train(train, "train", line);
    } else if (*c_eval) {
      run_eval(ev, nullptr, "eval", line);
    } else if (*c_ab) {
      const std::string root = ab.io.out;
      ab.io.out = root + "/train";
      auto model = run_train(ab, "ablate", line);
      ab_eval.io = ab.io;
      ab_eval.io.out = root + "/eval";
      if (!ab_eval_net.empty()) ab_eval.io.net_path = ab_eval_net;
      if (!ab_eval_demand.empty()) ab_eval.io.demand_path = ab_eval_demand;
      ab_eval.label = "lats_" + trainer::to_string(model->variant());
      run_eval(ab_eval, model.get(), "ablate", line);
      Manifest top(root, "ablate", line);
      top["variant"] = trainer::to_string(model->variant());
      top.add_file(root + "/train/manifest.json");
      top.add_file(root + "/eval/manifest.json");
      top.write();
    }
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitUsage;
  } catch (const TopologyError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitUsage;
  } catch (const VersionError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
