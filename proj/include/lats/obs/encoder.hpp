#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "lats/net/network.hpp"
#include "lats/sim/simulator.hpp"

namespace lats::obs {

inline constexpr std::size_t kStateCols = 5;  // P, Q_in, Q_out, N_in, N_out
inline constexpr std::size_t kTopologyDim = 3 + 7;
inline constexpr std::size_t kHistory = 4;

struct ObsConfig {
  std::size_t m_max = 36;
  std::size_t p_max = 8;
  double length_scale = 100.0;  // m
  double speed_scale = 20.0;    // m/s
  double lanes_scale = 1.0;
  double movements_scale = 10.0;
};

/// Row-major dense matrices; padded rows/cols are zero.
struct ObservationBundle {
  std::size_t intersection = 0;
  std::size_t n_movements = 0;
  std::size_t n_phases = 0;
  std::vector<double> S;               // m_max x 5
  std::vector<double> G;               // p_max x m_max
  std::vector<double> I;               // kTopologyDim
  std::vector<double> phase_mask;      // p_max
  std::vector<double> movement_mask;   // m_max
  std::vector<std::vector<double>> history;  // kHistory snapshots of S, oldest first
  double reward = 0.0;
  int detector_cap = 6;          // divisor used to normalize counts in S
  std::vector<int> stopped_in;   // raw counts per real movement (incoming lane)
  std::vector<int> stopped_out;
  std::vector<int> moving_in;
  std::vector<int> moving_out;
};

/// Prior S_t snapshots for one intersection, most recent last.
class HistoryBuffer {
 public:
  void push(const std::vector<double>& s);
  void clear() { items_.clear(); }
  /// Exactly kHistory entries; missing ones are zero-filled at the front.
  std::vector<std::vector<double>> padded(std::size_t size) const;
  std::size_t size() const { return items_.size(); }

 private:
  std::deque<std::vector<double>> items_;
};

std::vector<double> topology_vector(const net::NetworkSpec& net, std::size_t intersection,
                                    const ObsConfig& cfg = {});

double compute_reward(const std::vector<int>& stopped_on_incoming);

/// Throws UnknownIntersection, or ShapeError if the intersection exceeds m_max/p_max.
ObservationBundle encode_intersection(const sim::Simulator& sim, std::size_t intersection,
                                      const HistoryBuffer& history, const ObsConfig& cfg = {});
ObservationBundle encode_intersection(const sim::Simulator& sim, std::string_view intersection_id,
                                      const HistoryBuffer& history, const ObsConfig& cfg = {});

/// x_p = [S_t, G_p, I] flattened in that order (m_max*5 + m_max + kTopologyDim).
std::vector<double> phase_input(const ObservationBundle& obs, std::size_t phase, const ObsConfig& cfg = {});
std::size_t phase_input_dim(const ObsConfig& cfg = {});

/// Everything a phase prompt is rendered from.
struct PhasePromptSource {
  std::size_t intersection = 0;
  std::size_t phase = 0;
  std::size_t n_movements = 0;
  int detector_cap = 6;
  std::vector<double> x_p;                 // phase_input order
  std::vector<std::vector<double>> steps;  // kHistory snapshots of S, oldest first, last = current
};

/// The three most recent history entries plus the current S.
PhasePromptSource prompt_source(const ObservationBundle& obs, std::size_t phase, const ObsConfig& cfg = {});

}  // namespace lats::obs
