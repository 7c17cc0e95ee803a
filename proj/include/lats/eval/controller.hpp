#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lats/sim/simulator.hpp"

namespace lats::eval {

/// Chooses one phase per intersection at every decision step.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Called once before each episode.
  virtual void reset(std::uint64_t /*seed*/) {}
  /// Phase index per intersection (network order) for decision step `step`.
  virtual std::vector<std::size_t> decide(const sim::Simulator& sim, int step) = 0;
};

}  // namespace lats::eval
