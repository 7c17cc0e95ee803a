#pragma once

#include <map>
#include <memory>
#include <string>

#include "lats/eval/controller.hpp"

namespace lats::baselines {

using Readings = std::map<std::size_t, sim::DetectorReading>;  // lane index -> reading

/// Cyclic order, one decision interval per phase, offset 0.
std::size_t fixed_time(std::size_t n_phases, int step);

/// Phase serving the most stopped vehicles: sum of stopped counts over the
/// distinct incoming lanes of its movements. Ties go to the lowest index.
std::size_t greedy(const net::NetworkSpec& net, std::size_t intersection, const Readings& readings);

/// argmax over phases of sum over movements of (stopped in - stopped out),
/// raw counts. Ties go to the lowest index.
std::size_t max_pressure(const net::NetworkSpec& net, std::size_t intersection, const Readings& readings);

class FixedTimeController : public eval::Controller {
 public:
  std::string name() const override { return "fixed_time"; }
  std::vector<std::size_t> decide(const sim::Simulator& sim, int step) override;
};

class GreedyController : public eval::Controller {
 public:
  std::string name() const override { return "greedy"; }
  std::vector<std::size_t> decide(const sim::Simulator& sim, int step) override;
};

class MaxPressureController : public eval::Controller {
 public:
  std::string name() const override { return "max_pressure"; }
  std::vector<std::size_t> decide(const sim::Simulator& sim, int step) override;
};

/// "fixed_time", "greedy" or "max_pressure". Throws ArgumentError otherwise.
std::unique_ptr<eval::Controller> make_baseline(const std::string& name);

}  // namespace lats::baselines
