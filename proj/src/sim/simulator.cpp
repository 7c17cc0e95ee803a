#include "lats/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "lats/common/errors.hpp"
#include "lats/common/hash.hpp"

namespace lats::sim {

using net::NetworkSpec;

double DetectorReading::stopped_norm() const {
  return static_cast<double>(std::min(stopped, cap)) / cap;
}
double DetectorReading::moving_norm() const {
  return static_cast<double>(std::min(moving, cap)) / cap;
}

namespace {

double free_flow(const NetworkSpec& net, std::size_t road) {
  return net.roads[road].length / net.roads[road].max_speed;
}

}  // namespace

Simulator::Simulator(const NetworkSpec& net, const net::DemandSpec& demand, std::uint64_t seed,
                     SimConfig cfg)
    : net_(&net), cfg_(cfg), rng_state_(derive_seed(seed, 0x51u)) {
  const std::size_t n_road = net.roads.size();
  const std::size_t n_lane = net.lanes.size();
  lanes_.assign(n_lane, {});
  last_discharge_.assign(n_lane, -std::numeric_limits<double>::infinity());
  pending_.assign(n_road, {});
  green_.assign(net.movements.size(), 0);
  lane_moves_.assign(n_lane, {});
  for (std::size_t m = 0; m < net.movements.size(); ++m) {
    const auto& mi = net.movement_index(m);
    lane_moves_[mi.in_lane].push_back({mi.out_road, m});
  }
  signals_.assign(net.intersections.size(), {});
  for (std::size_t i = 0; i < signals_.size(); ++i) {
    signals_[i].mode_remaining_s = cfg_.green_s;
    refresh_green(i);
  }

  dest_slot_.assign(n_road, static_cast<std::size_t>(-1));
  for (const net::FlowSpec& f : demand.flows) {
    auto o = net.find_road(f.origin);
    auto d = net.find_road(f.destination);
    if (!o || !d) throw TopologyError("flow references unknown road");
    flows_.push_back({*o, *d, f.start_s, f.end_s, f.rate_veh_per_h, 0.0});
    if (dest_slot_[*d] != static_cast<std::size_t>(-1)) continue;
    // Cost-to-go (free-flow seconds, inclusive of both ends) towards *d.
    std::vector<std::vector<std::size_t>> prev(n_road);
    for (std::size_t m = 0; m < net.movements.size(); ++m) {
      const auto& mi = net.movement_index(m);
      prev[mi.out_road].push_back(mi.in_road);
    }
    std::vector<double> dist(n_road, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[*d] = free_flow(net, *d);
    pq.push({dist[*d], *d});
    while (!pq.empty()) {
      auto [c, r] = pq.top();
      pq.pop();
      if (c > dist[r]) continue;
      for (std::size_t p : prev[r]) {
        double nc = c + free_flow(net, p);
        if (nc < dist[p]) {
          dist[p] = nc;
          pq.push({nc, p});
        }
      }
    }
    if (!std::isfinite(dist[*o])) throw TopologyError("flow " + f.origin + " -> " + f.destination + " is unreachable");
    dest_slot_[*d] = dist_to_.size();
    dist_to_.push_back(std::move(dist));
  }
}

std::vector<std::size_t> Simulator::route_for(std::size_t origin, std::size_t destination) {
  const auto& dist = dist_to_[dest_slot_[destination]];
  std::vector<std::size_t> route{origin};
  std::size_t cur = origin;
  while (cur != destination) {
    std::vector<std::size_t> best;
    for (const auto& lm : net_->road_lanes(cur)) {
      for (const auto& [out_road, m] : lane_moves_[lm]) {
        (void)m;
        if (std::find(best.begin(), best.end(), out_road) != best.end()) continue;
        double via = free_flow(*net_, cur) + dist[out_road];
        if (std::abs(via - dist[cur]) <= 1e-9 * std::max(1.0, dist[cur])) best.push_back(out_road);
      }
    }
    if (best.empty()) throw TopologyError("routing dead end");
    std::sort(best.begin(), best.end());
    std::size_t pick = 0;
    if (best.size() > 1) {
      rng_state_ = mix64(rng_state_);
      pick = static_cast<std::size_t>(rng_state_ % best.size());
    }
    cur = best[pick];
    route.push_back(cur);
  }
  return route;
}

bool Simulator::lane_has_room(std::size_t lane) const {
  const auto& q = lanes_[lane];
  return q.empty() || vehicles_[q.back()].position >= cfg_.vehicle_length;
}

std::optional<std::size_t> Simulator::entry_lane(const Vehicle& v, std::size_t road) const {
  // Lanes of `road` able to continue along the route, least occupied first.
  const std::size_t leg = static_cast<std::size_t>(
      std::find(v.route.begin(), v.route.end(), road) - v.route.begin());
  std::optional<std::size_t> best;
  for (std::size_t l : net_->road_lanes(road)) {
    if (leg + 1 < v.route.size()) {
      bool serves = std::any_of(lane_moves_[l].begin(), lane_moves_[l].end(),
                                [&](const auto& lm) { return lm.first == v.route[leg + 1]; });
      if (!serves) continue;
    }
    if (!lane_has_room(l)) continue;
    if (!best || lanes_[l].size() < lanes_[*best].size()) best = l;
  }
  return best;
}

void Simulator::refresh_green(std::size_t i) {
  const auto& ix = net_->intersection_index_data(i);
  const SignalState& s = signals_[i];
  for (std::size_t m : ix.movements) green_[m] = cfg_.all_green ? 1 : 0;
  if (cfg_.all_green || s.mode != SignalMode::green) return;
  for (std::size_t k : ix.phase_local[s.active_phase]) green_[ix.movements[k]] = 1;
}

void Simulator::apply_phase(std::size_t i, std::size_t phase) {
  if (i >= signals_.size()) throw UnknownIntersection("intersection index out of range");
  const auto& ix = net_->intersection_index_data(i);
  if (phase >= ix.phase_local.size()) {
    throw PhaseUnavailable("phase " + std::to_string(phase) + " not available at '" +
                           net_->intersections[i].id + "'");
  }
  SignalState& s = signals_[i];
  const bool same = s.mode == SignalMode::green ? s.active_phase == phase
                                                : s.pending_phase == phase;
  if (same) {
    if (s.mode == SignalMode::yellow) return;  // transition already under way
    s.pending_phase.reset();
    s.mode_remaining_s = cfg_.green_s;
  } else {
    s.mode = SignalMode::yellow;
    s.pending_phase = phase;
    s.mode_remaining_s = cfg_.yellow_s;
  }
  refresh_green(i);
}

void Simulator::apply_phase(std::string_view intersection_id, std::string_view phase_id) {
  std::size_t i = net_->intersection_index(intersection_id);
  const auto& phases = net_->intersections[i].phases;
  for (std::size_t p = 0; p < phases.size(); ++p) {
    if (phases[p].id == phase_id) return apply_phase(i, p);
  }
  throw PhaseUnavailable("phase '" + std::string(phase_id) + "' not available at '" +
                         std::string(intersection_id) + "'");
}

void Simulator::advance(std::size_t vid, int& discharged, int& completed) {
  Vehicle& v = vehicles_[vid];
  v.moved_tick = tick_;
  const std::size_t road = v.route[v.leg];
  const double L = net_->roads[road].length;
  const double vmax = net_->roads[road].max_speed;
  const double x = v.position;
  auto& q = lanes_[v.lane];

  const bool has_leader = q.front() != vid;
  const double reach = x + vmax;
  if (has_leader || reach < L) {
    double limit = L;
    if (has_leader) {
      auto it = std::find(q.begin(), q.end(), vid);
      limit = vehicles_[*(it - 1)].position - cfg_.vehicle_length;
    }
    const double nx = std::max(x, std::min(reach, limit));
    v.speed = nx - x;
    v.position = nx;
    return;
  }

  const double tau = (L - x) / vmax;
  const double t = static_cast<double>(tick_);
  if (v.leg + 1 == v.route.size()) {
    q.pop_front();
    v.position = L;
    v.speed = vmax;
    v.arrive_s = t + tau;
    --active_;
    ++completed_;
    ++completed;
    return;
  }

  std::optional<std::size_t> target;
  if (t - last_discharge_[v.lane] >= cfg_.headway_s) {
    const std::size_t next = v.route[v.leg + 1];
    for (const auto& [out_road, m] : lane_moves_[v.lane]) {
      if (out_road != next || !green_[m]) continue;
      const std::size_t ol = net_->movement_index(m).out_lane;
      if (v.leg + 2 < v.route.size()) {
        bool serves = std::any_of(lane_moves_[ol].begin(), lane_moves_[ol].end(),
                                  [&](const auto& lm) { return lm.first == v.route[v.leg + 2]; });
        if (!serves) continue;
      }
      if (!lane_has_room(ol)) continue;
      if (!target || lanes_[ol].size() < lanes_[*target].size() ||
          (lanes_[ol].size() == lanes_[*target].size() && ol < *target)) {
        target = ol;
      }
    }
  }
  if (!target) {
    v.speed = L - x;
    v.position = L;
    return;
  }

  q.pop_front();
  last_discharge_[v.lane] = t;
  const std::size_t next_road = v.route[v.leg + 1];
  const double L2 = net_->roads[next_road].length;
  double nx = (1.0 - tau) * net_->roads[next_road].max_speed;
  auto& q2 = lanes_[*target];
  if (!q2.empty()) nx = std::min(nx, vehicles_[q2.back()].position - cfg_.vehicle_length);
  nx = std::clamp(nx, 0.0, L2);
  q2.push_back(vid);
  v.leg += 1;
  v.lane = *target;
  v.position = nx;
  v.speed = (L - x) + nx;
  ++discharged;
}

TickReport Simulator::step() {
  TickReport rep;
  const double t = static_cast<double>(tick_);

  // Demand accrues in integer-friendly units: +rate per tick, one vehicle per 3600.
  for (Flow& f : flows_) {
    if (!(f.start_s <= t && t < f.end_s)) continue;
    f.acc += f.rate;
    while (f.acc >= 3600.0) {
      f.acc -= 3600.0;
      Vehicle v;
      v.id = vehicles_.size();
      v.route = route_for(f.origin, f.destination);
      v.depart_request_s = t;
      for (std::size_t r : v.route) v.free_flow_s += free_flow(*net_, r);
      pending_[f.origin].push_back(v.id);
      vehicles_.push_back(std::move(v));
      ++pending_count_;
    }
  }
  for (std::size_t r = 0; r < pending_.size(); ++r) {
    auto& pq = pending_[r];
    while (!pq.empty()) {
      Vehicle& v = vehicles_[pq.front()];
      auto lane = entry_lane(v, r);
      if (!lane) break;
      v.lane = *lane;
      v.leg = 0;
      v.position = 0.0;
      v.speed = 0.0;
      v.depart_actual_s = t;
      lanes_[*lane].push_back(v.id);
      pq.pop_front();
      --pending_count_;
      ++inserted_;
      ++active_;
      ++rep.inserted;
    }
  }

  for (std::size_t l = 0; l < lanes_.size(); ++l) {
    auto& q = lanes_[l];
    std::size_t k = 0;
    while (k < q.size()) {
      const std::size_t vid = q[k];
      if (vehicles_[vid].moved_tick == tick_) {
        ++k;
        continue;
      }
      advance(vid, rep.discharged, rep.completed);
      if (k < q.size() && q[k] == vid) ++k;
    }
  }

  for (const auto& q : lanes_) {
    for (std::size_t vid : q) {
      Vehicle& v = vehicles_[vid];
      if (v.speed < cfg_.stop_speed) {
        v.cumulative_stop_s += 1.0;
        v.continuous_wait_s += 1.0;
      } else {
        v.continuous_wait_s = 0.0;
      }
    }
  }

  if (trace_) write_trace();

  for (std::size_t i = 0; i < signals_.size(); ++i) {
    SignalState& s = signals_[i];
    if (s.mode_remaining_s > 0) --s.mode_remaining_s;
    if (s.mode == SignalMode::yellow && s.mode_remaining_s == 0) {
      s.active_phase = *s.pending_phase;
      s.pending_phase.reset();
      s.mode = SignalMode::green;
      s.mode_remaining_s = cfg_.green_s - cfg_.yellow_s;
      refresh_green(i);
    }
  }

  ++tick_;
  rep.clock_s = clock_s();
  return rep;
}

DetectorReading Simulator::lane_detector(std::size_t lane) const {
  DetectorReading r;
  r.cap = cfg_.detector_cap;
  const double L = net_->roads[net_->lane_road(lane)].length;
  for (std::size_t vid : lanes_[lane]) {
    const Vehicle& v = vehicles_[vid];
    if (v.position < L - cfg_.detector_range) continue;
    if (v.speed < cfg_.stop_speed)
      ++r.stopped;
    else
      ++r.moving;
  }
  return r;
}

std::map<std::size_t, DetectorReading> Simulator::read_detectors(std::size_t i) const {
  if (i >= signals_.size()) throw UnknownIntersection("intersection index out of range");
  std::map<std::size_t, DetectorReading> out;
  const auto& ix = net_->intersection_index_data(i);
  for (std::size_t l : ix.incoming_lanes) out[l] = lane_detector(l);
  for (std::size_t l : ix.outgoing_lanes) out[l] = lane_detector(l);
  return out;
}

std::map<std::size_t, DetectorReading> Simulator::read_detectors(std::string_view id) const {
  return read_detectors(net_->intersection_index(id));
}

ConservationReport Simulator::conservation() const {
  return {inserted_, active_, completed_, pending_count_};
}

std::size_t Simulator::place_vehicle(std::size_t lane, double position, double speed,
                                     std::vector<std::size_t> route) {
  if (lane >= lanes_.size()) throw ArgumentError("lane index out of range");
  if (route.empty() || route.front() != net_->lane_road(lane)) {
    throw ArgumentError("route must start on the lane's road");
  }
  const double L = net_->roads[route.front()].length;
  if (position < 0.0 || position > L) throw ArgumentError("position outside lane");
  Vehicle v;
  v.id = vehicles_.size();
  v.route = std::move(route);
  v.lane = lane;
  v.position = position;
  v.speed = speed;
  v.depart_request_s = clock_s();
  v.depart_actual_s = clock_s();
  for (std::size_t r : v.route) v.free_flow_s += free_flow(*net_, r);
  auto& q = lanes_[lane];
  auto it = std::find_if(q.begin(), q.end(),
                         [&](std::size_t o) { return vehicles_[o].position < position; });
  q.insert(it, v.id);
  vehicles_.push_back(std::move(v));
  ++inserted_;
  ++active_;
  return vehicles_.size() - 1;
}

void Simulator::set_trace(std::ostream* out) {
  trace_ = out;
  if (trace_) *trace_ << "t,intersection,phase,mode,lane,stopped,moving\n";
}

void Simulator::write_trace() {
  for (std::size_t i = 0; i < signals_.size(); ++i) {
    const SignalState& s = signals_[i];
    const auto& is = net_->intersections[i];
    for (std::size_t l : net_->intersection_index_data(i).incoming_lanes) {
      DetectorReading r = lane_detector(l);
      *trace_ << tick_ << ',' << is.id << ',' << is.phases[s.active_phase].id << ','
              << (s.mode == SignalMode::green ? "green" : "yellow") << ',' << net_->lanes[l].id
              << ',' << r.stopped << ',' << r.moving << '\n';
    }
  }
}

}  // namespace lats::sim
