#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "lats/net/demand.hpp"
#include "lats/net/network.hpp"

namespace lats::sim {

struct SimConfig {
  double vehicle_length = 7.5;  // effective length incl. gap, m
  double headway_s = 2.0;       // saturation headway per lane
  double stop_speed = 0.1;      // below this a vehicle counts as stopped
  double detector_range = 50.0;
  int detector_cap = 6;         // floor(50 / 7.5)
  int green_s = 10;
  int yellow_s = 3;
  bool all_green = false;       // oracle control: every movement may discharge
};

struct Vehicle {
  std::uint64_t id = 0;
  std::vector<std::size_t> route;  // road indices, origin first
  std::size_t leg = 0;             // index into route of the current road
  std::size_t lane = 0;
  double position = 0.0;           // m from the upstream end of the lane
  double speed = 0.0;
  double depart_request_s = 0.0;
  std::optional<double> depart_actual_s;
  std::optional<double> arrive_s;
  double cumulative_stop_s = 0.0;
  double continuous_wait_s = 0.0;
  double free_flow_s = 0.0;        // sum of length / max_speed along the route
  std::int64_t moved_tick = -1;
};

enum class SignalMode { green, yellow };

struct SignalState {
  std::size_t active_phase = 0;
  std::optional<std::size_t> pending_phase;
  SignalMode mode = SignalMode::green;
  int mode_remaining_s = 0;
};

struct DetectorReading {
  int stopped = 0;
  int moving = 0;
  int cap = 6;
  double stopped_norm() const;
  double moving_norm() const;
};

struct TickReport {
  double clock_s = 0.0;
  int inserted = 0;
  int completed = 0;
  int discharged = 0;
};

struct ConservationReport {
  std::size_t inserted = 0;
  std::size_t active = 0;
  std::size_t completed = 0;
  std::size_t pending = 0;
};

/// Point-queue simulator at 1 Hz. Holds a reference to the network, which
/// must outlive it. Copyable; copies evolve independently.
class Simulator {
 public:
  Simulator(const net::NetworkSpec& net, const net::DemandSpec& demand, std::uint64_t seed,
            SimConfig cfg = {});

  const net::NetworkSpec& network() const { return *net_; }
  const SimConfig& config() const { return cfg_; }
  double clock_s() const { return static_cast<double>(tick_); }
  std::int64_t tick() const { return tick_; }

  /// Same phase: 10 s green. Different phase: 3 s yellow then the rest green.
  void apply_phase(std::size_t intersection, std::size_t phase);
  void apply_phase(std::string_view intersection_id, std::string_view phase_id);
  const SignalState& signal(std::size_t intersection) const { return signals_.at(intersection); }

  TickReport step();

  DetectorReading lane_detector(std::size_t lane) const;
  /// Incoming and outgoing lanes of the intersection, keyed by lane index.
  std::map<std::size_t, DetectorReading> read_detectors(std::size_t intersection) const;
  std::map<std::size_t, DetectorReading> read_detectors(std::string_view intersection_id) const;

  ConservationReport conservation() const;

  const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  const std::deque<std::size_t>& lane_queue(std::size_t lane) const { return lanes_[lane]; }
  std::size_t requested() const { return vehicles_.size(); }

  /// Test hook: puts a vehicle directly onto a lane. route[0] must be the lane's road.
  std::size_t place_vehicle(std::size_t lane, double position, double speed,
                            std::vector<std::size_t> route);

  /// Per-tick detector log: t,intersection,phase,mode,lane,stopped,moving
  void set_trace(std::ostream* out);

 private:
  struct Flow {
    std::size_t origin = 0;
    std::size_t destination = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    double rate = 0.0;
    double acc = 0.0;  // veh*s/h units; one vehicle per 3600
  };

  std::vector<std::size_t> route_for(std::size_t origin, std::size_t destination);
  std::optional<std::size_t> entry_lane(const Vehicle& v, std::size_t road) const;
  bool lane_has_room(std::size_t lane) const;
  void advance(std::size_t vid, int& discharged, int& completed);
  void refresh_green(std::size_t intersection);
  void write_trace();

  const net::NetworkSpec* net_;
  SimConfig cfg_;
  std::uint64_t rng_state_;
  std::int64_t tick_ = 0;

  std::vector<Flow> flows_;
  std::vector<std::vector<double>> dist_to_;  // per destination road: cost-to-go
  std::vector<std::size_t> dest_slot_;        // road -> slot in dist_to_

  std::vector<Vehicle> vehicles_;
  std::vector<std::deque<std::size_t>> pending_;  // per origin road, FIFO
  std::vector<std::deque<std::size_t>> lanes_;    // front = nearest the stop line
  std::vector<double> last_discharge_;
  std::vector<SignalState> signals_;
  std::vector<char> green_;  // per movement
  // lane -> (out_road, movement) pairs
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> lane_moves_;

  std::size_t inserted_ = 0;
  std::size_t active_ = 0;
  std::size_t completed_ = 0;
  std::size_t pending_count_ = 0;
  std::ostream* trace_ = nullptr;
};

}  // namespace lats::sim
