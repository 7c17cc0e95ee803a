#include "lats/obs/encoder.hpp"

#include "lats/common/errors.hpp"

namespace lats::obs {

void HistoryBuffer::push(const std::vector<double>& s) {
  items_.push_back(s);
  while (items_.size() > kHistory) items_.pop_front();
}

std::vector<std::vector<double>> HistoryBuffer::padded(std::size_t size) const {
  std::vector<std::vector<double>> out(kHistory - items_.size(), std::vector<double>(size, 0.0));
  for (const auto& s : items_) out.push_back(s);
  return out;
}

std::vector<double> topology_vector(const net::NetworkSpec& net, std::size_t i, const ObsConfig& cfg) {
  const auto& ix = net.intersection_index_data(i);
  std::vector<double> v(kTopologyDim, 0.0);
  v[static_cast<std::size_t>(net.intersections[i].type_tag)] = 1.0;
  auto avg = [&](const std::vector<std::size_t>& roads, auto field) {
    double s = 0.0;
    for (std::size_t r : roads) s += field(net.roads[r]);
    return roads.empty() ? 0.0 : s / static_cast<double>(roads.size());
  };
  auto len = [](const net::RoadSpec& r) { return r.length; };
  auto spd = [](const net::RoadSpec& r) { return r.max_speed; };
  auto lanes = [](const net::RoadSpec& r) { return static_cast<double>(r.lane_count); };
  v[3] = avg(ix.incoming_roads, len) / cfg.length_scale;
  v[4] = avg(ix.incoming_roads, spd) / cfg.speed_scale;
  v[5] = avg(ix.incoming_roads, lanes) / cfg.lanes_scale;
  // Movements per incoming road.
  v[6] = ix.incoming_roads.empty()
             ? 0.0
             : static_cast<double>(ix.movements.size()) / ix.incoming_roads.size() / cfg.movements_scale;
  v[7] = avg(ix.outgoing_roads, len) / cfg.length_scale;
  v[8] = avg(ix.outgoing_roads, spd) / cfg.speed_scale;
  v[9] = avg(ix.outgoing_roads, lanes) / cfg.lanes_scale;
  return v;
}

double compute_reward(const std::vector<int>& stopped) {
  double s = 0.0;
  for (int c : stopped) s += c;
  return -s;
}

ObservationBundle encode_intersection(const sim::Simulator& sim, std::size_t i,
                                      const HistoryBuffer& history, const ObsConfig& cfg) {
  const net::NetworkSpec& net = sim.network();
  if (i >= net.intersections.size()) throw UnknownIntersection("intersection index out of range");
  const auto& ix = net.intersection_index_data(i);
  const std::size_t nm = ix.movements.size();
  const std::size_t np = ix.phase_local.size();
  if (nm > cfg.m_max || np > cfg.p_max) {
    throw ShapeError("intersection '" + net.intersections[i].id + "' exceeds padding (" +
                     std::to_string(nm) + " movements, " + std::to_string(np) + " phases)");
  }
  ObservationBundle o;
  o.intersection = i;
  o.n_movements = nm;
  o.n_phases = np;
  o.S.assign(cfg.m_max * kStateCols, 0.0);
  o.G.assign(cfg.p_max * cfg.m_max, 0.0);
  o.phase_mask.assign(cfg.p_max, 0.0);
  o.movement_mask.assign(cfg.m_max, 0.0);
  o.I = topology_vector(net, i, cfg);

  const auto& sig = sim.signal(i);
  std::vector<char> active(nm, 0);
  for (std::size_t k : ix.phase_local[sig.active_phase]) active[k] = 1;

  auto readings = sim.read_detectors(i);
  for (std::size_t k = 0; k < nm; ++k) {
    const auto& mi = net.movement_index(ix.movements[k]);
    const sim::DetectorReading& rin = readings.at(mi.in_lane);
    const sim::DetectorReading& rout = readings.at(mi.out_lane);
    double* row = &o.S[k * kStateCols];
    row[0] = active[k] ? 1.0 : 0.0;
    row[1] = rin.stopped_norm();
    row[2] = rout.stopped_norm();
    row[3] = rin.moving_norm();
    row[4] = rout.moving_norm();
    o.movement_mask[k] = 1.0;
    o.stopped_in.push_back(rin.stopped);
    o.stopped_out.push_back(rout.stopped);
    o.moving_in.push_back(rin.moving);
    o.moving_out.push_back(rout.moving);
  }
  for (std::size_t p = 0; p < np; ++p) {
    o.phase_mask[p] = 1.0;
    for (std::size_t k : ix.phase_local[p]) o.G[p * cfg.m_max + k] = 1.0;
  }
  std::vector<int> in_counts;
  for (std::size_t l : ix.incoming_lanes) in_counts.push_back(readings.at(l).stopped);
  o.reward = compute_reward(in_counts);
  o.detector_cap = sim.config().detector_cap;
  o.history = history.padded(o.S.size());
  return o;
}

ObservationBundle encode_intersection(const sim::Simulator& sim, std::string_view id,
                                      const HistoryBuffer& history, const ObsConfig& cfg) {
  return encode_intersection(sim, sim.network().intersection_index(id), history, cfg);
}

std::size_t phase_input_dim(const ObsConfig& cfg) { return cfg.m_max * kStateCols + cfg.m_max + kTopologyDim; }

std::vector<double> phase_input(const ObservationBundle& o, std::size_t p, const ObsConfig& cfg) {
  if (p >= cfg.p_max) throw ShapeError("phase index beyond p_max");
  std::vector<double> x;
  x.reserve(phase_input_dim(cfg));
  x.insert(x.end(), o.S.begin(), o.S.end());
  x.insert(x.end(), o.G.begin() + p * cfg.m_max, o.G.begin() + (p + 1) * cfg.m_max);
  x.insert(x.end(), o.I.begin(), o.I.end());
  return x;
}

PhasePromptSource prompt_source(const ObservationBundle& o, std::size_t p, const ObsConfig& cfg) {
  if (p >= o.n_phases) throw ShapeError("prompt_source: phase " + std::to_string(p) + " is padding");
  PhasePromptSource src;
  src.intersection = o.intersection;
  src.phase = p;
  src.n_movements = o.n_movements;
  src.detector_cap = o.detector_cap;
  src.x_p = phase_input(o, p, cfg);
  const std::size_t keep = kHistory - 1;
  const std::size_t first = o.history.size() > keep ? o.history.size() - keep : 0;
  for (std::size_t k = first; k < o.history.size(); ++k) src.steps.push_back(o.history[k]);
  while (src.steps.size() + 1 < kHistory) src.steps.insert(src.steps.begin(), std::vector<double>(o.S.size(), 0.0));
  src.steps.push_back(o.S);
  return src;
}

}  // namespace lats::obs
