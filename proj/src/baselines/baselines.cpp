#include "lats/baselines/baselines.hpp"

#include <set>

#include "lats/common/errors.hpp"

namespace lats::baselines {

std::size_t fixed_time(std::size_t n_phases, int step) {
  if (n_phases == 0) throw ArgumentError("fixed_time: intersection has no phases");
  if (step < 0) throw ArgumentError("fixed_time: negative step");
  return static_cast<std::size_t>(step) % n_phases;
}

namespace {

int stopped(const Readings& r, std::size_t lane) {
  auto it = r.find(lane);
  if (it == r.end()) throw ArgumentError("missing detector reading for lane " + std::to_string(lane));
  return it->second.stopped;
}

template <typename Score>
std::size_t argmax_phase(const net::NetworkSpec& net, std::size_t i, Score score) {
  const auto& ix = net.intersection_index_data(i);
  std::size_t best = 0;
  long best_score = 0;
  for (std::size_t p = 0; p < ix.phase_local.size(); ++p) {
    const long s = score(ix, ix.phase_local[p]);
    if (p == 0 || s > best_score) {
      best = p;
      best_score = s;
    }
  }
  return best;
}

}  // namespace

std::size_t greedy(const net::NetworkSpec& net, std::size_t i, const Readings& r) {
  return argmax_phase(net, i, [&](const net::IntersectionIndex& ix, const std::vector<std::size_t>& moves) {
    std::set<std::size_t> lanes;
    for (std::size_t k : moves) lanes.insert(net.movement_index(ix.movements[k]).in_lane);
    long s = 0;
    for (std::size_t l : lanes) s += stopped(r, l);
    return s;
  });
}

std::size_t max_pressure(const net::NetworkSpec& net, std::size_t i, const Readings& r) {
  return argmax_phase(net, i, [&](const net::IntersectionIndex& ix, const std::vector<std::size_t>& moves) {
    long s = 0;
    for (std::size_t k : moves) {
      const auto& mi = net.movement_index(ix.movements[k]);
      s += stopped(r, mi.in_lane) - stopped(r, mi.out_lane);
    }
    return s;
  });
}

std::vector<std::size_t> FixedTimeController::decide(const sim::Simulator& sim, int step) {
  std::vector<std::size_t> out;
  for (const auto& is : sim.network().intersections) out.push_back(fixed_time(is.phases.size(), step));
  return out;
}

std::vector<std::size_t> GreedyController::decide(const sim::Simulator& sim, int) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sim.network().intersections.size(); ++i) {
    out.push_back(greedy(sim.network(), i, sim.read_detectors(i)));
  }
  return out;
}

std::vector<std::size_t> MaxPressureController::decide(const sim::Simulator& sim, int) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sim.network().intersections.size(); ++i) {
    out.push_back(max_pressure(sim.network(), i, sim.read_detectors(i)));
  }
  return out;
}

std::unique_ptr<eval::Controller> make_baseline(const std::string& name) {
  if (name == "fixed_time" || name == "fixed") return std::make_unique<FixedTimeController>();
  if (name == "greedy") return std::make_unique<GreedyController>();
  if (name == "max_pressure") return std::make_unique<MaxPressureController>();
  throw ArgumentError("unknown baseline '" + name + "' (fixed_time, greedy, max_pressure)");
}

}  // namespace lats::baselines
