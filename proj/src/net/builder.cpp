#include "lats/net/builder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <unordered_map>

#include "lats/common/errors.hpp"
#include "lats/net/geometry.hpp"

namespace lats::net {

namespace {

std::string road_id(const std::string& a, const std::string& b) { return a + "__" + b; }

// Movement sets for one phase are grown greedily; a candidate that conflicts
// with an already accepted movement is skipped.
std::vector<std::size_t> greedy_phase(const NetworkSpec& net, const std::vector<std::size_t>& candidates) {
  std::vector<std::size_t> accepted;
  for (std::size_t m : candidates) {
    bool ok = true;
    for (std::size_t a : accepted) {
      if (movements_conflict(net, m, a)) {
        ok = false;
        break;
      }
    }
    if (ok) accepted.push_back(m);
  }
  return accepted;
}

struct Approach {
  std::size_t road = 0;
  double bearing = 0.0;
  std::vector<std::size_t> movements;
  std::vector<std::size_t> left, through, right;  // by rank among targets
};

std::vector<std::vector<std::size_t>> phase_catalog(const NetworkSpec& net, std::size_t i,
                                                    std::vector<Approach>& apps) {
  std::vector<std::vector<std::size_t>> phases;
  auto concat = [](std::initializer_list<const std::vector<std::size_t>*> parts) {
    std::vector<std::size_t> out;
    for (auto* p : parts) out.insert(out.end(), p->begin(), p->end());
    return out;
  };
  const std::size_t n = apps.size();
  if (n == 4) {
    // Approaches are sorted by bearing, so 0/2 and 1/3 face each other.
    const Approach &a0 = apps[0], &a1 = apps[1], &a2 = apps[2], &a3 = apps[3];
    phases.push_back(greedy_phase(net, concat({&a0.through, &a2.through, &a0.right, &a2.right})));
    phases.push_back(greedy_phase(net, concat({&a0.left, &a2.left, &a0.right, &a2.right})));
    phases.push_back(greedy_phase(net, concat({&a1.through, &a3.through, &a1.right, &a3.right})));
    phases.push_back(greedy_phase(net, concat({&a1.left, &a3.left, &a1.right, &a3.right})));
    for (std::size_t k : {0u, 2u, 1u, 3u}) phases.push_back(greedy_phase(net, apps[k].movements));
  } else if (n == 3) {
    // Main road: the pair of approaches closest to facing each other.
    std::size_t best_a = 0, best_b = 1;
    double best = -1.0;
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = a + 1; b < 3; ++b) {
        double d = std::abs(std::remainder(apps[a].bearing - apps[b].bearing, 2 * std::numbers::pi));
        if (d > best) {
          best = d;
          best_a = a;
          best_b = b;
        }
      }
    std::size_t minor = 3 - best_a - best_b;
    const Approach &ma = apps[best_a], &mb = apps[best_b], &mi = apps[minor];
    phases.push_back(greedy_phase(net, concat({&ma.through, &mb.through, &ma.right, &mb.right})));
    phases.push_back(greedy_phase(net, concat({&mi.movements, &ma.left, &mb.left})));
    std::set<std::size_t> covered;
    for (auto& p : phases) covered.insert(p.begin(), p.end());
    for (const Approach& ap : apps) {
      bool missing = std::any_of(ap.movements.begin(), ap.movements.end(),
                                 [&](std::size_t m) { return !covered.count(m); });
      if (missing) {
        phases.push_back(greedy_phase(net, ap.movements));
        covered.insert(ap.movements.begin(), ap.movements.end());
      }
    }
  } else {
    for (const Approach& ap : apps) phases.push_back(greedy_phase(net, ap.movements));
  }
  std::vector<std::vector<std::size_t>> unique;
  for (auto& p : phases) {
    if (p.empty()) continue;
    std::vector<std::size_t> key = p;
    std::sort(key.begin(), key.end());
    bool dup = std::any_of(unique.begin(), unique.end(), [&](const std::vector<std::size_t>& u) {
      std::vector<std::size_t> k2 = u;
      std::sort(k2.begin(), k2.end());
      return k2 == key;
    });
    if (!dup) unique.push_back(std::move(p));
  }
  (void)i;
  return unique;
}

}  // namespace

NetworkSpec expand_layout(const Layout& layout, const PhaseTypeMap& types) {
  std::unordered_map<std::string, const LayoutNode*> nodes;
  for (const LayoutNode& n : layout.nodes) {
    if (!nodes.emplace(n.id, &n).second) throw ArgumentError("duplicate layout node '" + n.id + "'");
  }
  NetworkSpec raw;
  for (const LayoutNode& n : layout.nodes) {
    if (n.signalized) raw.intersections.push_back({n.id, n.position, TypeTag::four_phase, {}, {}, {}, {}});
  }
  for (const LayoutLink& link : layout.links) {
    auto ia = nodes.find(link.a), ib = nodes.find(link.b);
    if (ia == nodes.end() || ib == nodes.end()) throw ArgumentError("layout link references unknown node");
    if (link.lanes < 1) throw ArgumentError("layout link needs at least one lane");
    const Point pa = ia->second->position, pb = ib->second->position;
    const double length = link.length > 0.0 ? link.length : std::hypot(pb.x - pa.x, pb.y - pa.y);
    for (int dir = 0; dir < 2; ++dir) {
      const std::string& from = dir == 0 ? link.a : link.b;
      const std::string& to = dir == 0 ? link.b : link.a;
      RoadSpec r;
      r.id = road_id(from, to);
      r.from = from;
      r.to = to;
      r.length = length;
      r.max_speed = link.max_speed;
      r.lane_count = link.lanes;
      r.shape_from = dir == 0 ? pa : pb;
      r.shape_to = dir == 0 ? pb : pa;
      for (int k = 0; k < link.lanes; ++k) raw.lanes.push_back({r.id + "_" + std::to_string(k), r.id, k});
      raw.roads.push_back(std::move(r));
    }
  }

  // Movements come from raw road data; validation needs them to exist.
  for (std::size_t i = 0; i < raw.intersections.size(); ++i) {
    const std::string& iid = raw.intersections[i].id;
    std::vector<std::size_t> in_roads, out_roads;
    for (std::size_t r = 0; r < raw.roads.size(); ++r) {
      if (raw.roads[r].to == iid) in_roads.push_back(r);
      if (raw.roads[r].from == iid) out_roads.push_back(r);
    }
    const Point c = raw.intersections[i].position;
    auto bearing_of = [&](std::size_t r, bool incoming) {
      const Point far = incoming ? raw.roads[r].shape_from : raw.roads[r].shape_to;
      return std::atan2(far.y - c.y, far.x - c.x);
    };
    std::sort(in_roads.begin(), in_roads.end(), [&](std::size_t a, std::size_t b) {
      auto wrap = [](double t) { return t < 0 ? t + 2 * std::numbers::pi : t; };
      return wrap(bearing_of(a, true)) < wrap(bearing_of(b, true));
    });
    if (in_roads.size() < 2) throw ArgumentError("signalized node '" + iid + "' needs at least 2 approaches");
    for (std::size_t in : in_roads) {
      const double heading_in = bearing_of(in, true) + std::numbers::pi;
      struct Target {
        std::size_t road;
        double angle;
      };
      std::vector<Target> targets;
      for (std::size_t out : out_roads) {
        if (raw.roads[out].to == raw.roads[in].from) continue;  // no U-turns
        double a = std::remainder(bearing_of(out, false) - heading_in, 2 * std::numbers::pi);
        targets.push_back({out, a});
      }
      std::sort(targets.begin(), targets.end(), [](const Target& a, const Target& b) { return a.angle > b.angle; });
      const int n = raw.roads[in].lane_count;
      const int k = static_cast<int>(targets.size());
      for (int lane = 0; lane < n; ++lane) {
        for (int j = 0; j < k; ++j) {
          const bool serves = k >= n ? (j * n / k == lane) : (lane * k / n == j);
          if (!serves) continue;
          const RoadSpec& out = raw.roads[targets[j].road];
          for (int ol = 0; ol < out.lane_count; ++ol) {
            std::string in_lane = raw.roads[in].id + "_" + std::to_string(lane);
            std::string out_lane = out.id + "_" + std::to_string(ol);
            raw.movements.push_back({in_lane + "->" + out_lane, iid, in_lane, out_lane});
          }
        }
      }
    }
  }
  NetworkSpec with_moves = NetworkSpec::validated(raw, types, false);

  for (std::size_t i = 0; i < with_moves.intersections.size(); ++i) {
    const IntersectionIndex& ix = with_moves.intersection_index_data(i);
    std::vector<Approach> apps;
    for (std::size_t r : ix.incoming_roads) apps.push_back({r, road_bearing(with_moves, i, r), {}, {}, {}, {}});
    std::sort(apps.begin(), apps.end(), [](const Approach& a, const Approach& b) {
      auto wrap = [](double t) { return t < 0 ? t + 2 * std::numbers::pi : t; };
      return wrap(a.bearing) < wrap(b.bearing);
    });
    for (Approach& ap : apps) {
      std::vector<std::pair<double, std::size_t>> targets;
      for (std::size_t m : ix.movements) {
        const MovementIndex& mi = with_moves.movement_index(m);
        if (mi.in_road != ap.road) continue;
        ap.movements.push_back(m);
        double a = turn_angle(with_moves, i, mi.in_road, mi.out_road);
        if (std::none_of(targets.begin(), targets.end(), [&](auto& t) { return t.second == mi.out_road; }))
          targets.push_back({a, mi.out_road});
      }
      std::sort(targets.begin(), targets.end(), [](auto& a, auto& b) { return a.first > b.first; });
      for (std::size_t m : ap.movements) {
        const MovementIndex& mi = with_moves.movement_index(m);
        std::size_t rank = 0;
        while (targets[rank].second != mi.out_road) ++rank;
        Turn t;
        if (targets.size() >= 3) {
          t = rank == 0 ? Turn::left : (rank + 1 == targets.size() ? Turn::right : Turn::through);
        } else {
          t = classify_turn(targets[rank].first);
        }
        (t == Turn::left ? ap.left : t == Turn::right ? ap.right : ap.through).push_back(m);
      }
    }
    auto catalog = phase_catalog(with_moves, i, apps);
    IntersectionSpec& is = raw.intersections[i];
    for (std::size_t p = 0; p < catalog.size(); ++p) {
      PhaseSpec ph{is.id + "_p" + std::to_string(p), {}};
      for (std::size_t m : catalog[p]) ph.movement_ids.push_back(with_moves.movements[m].id);
      is.phases.push_back(std::move(ph));
    }
    is.type_tag = types.lookup(is.phases.size());
  }
  return NetworkSpec::validated(std::move(raw), types);
}

NetworkSpec build_grid(int rows, int cols, double lane_length, int lanes_per_road, double max_speed) {
  if (rows < 1 || cols < 1) throw ArgumentError("grid dimensions must be positive");
  if (lanes_per_road < 1) throw ArgumentError("lanes_per_road must be positive");
  if (!(lane_length > 0.0)) throw ArgumentError("lane_length must be positive");
  Layout lay;
  auto iname = [](int r, int c) { return "I_" + std::to_string(r) + "_" + std::to_string(c); };
  const double L = lane_length;
  auto y_of = [&](int r) { return (rows - 1 - r) * L; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) lay.nodes.push_back({iname(r, c), {c * L, y_of(r)}, true});
  for (int r = 0; r < rows; ++r) {
    lay.nodes.push_back({"W_" + std::to_string(r), {-L, y_of(r)}, false});
    lay.nodes.push_back({"E_" + std::to_string(r), {cols * L, y_of(r)}, false});
  }
  for (int c = 0; c < cols; ++c) {
    lay.nodes.push_back({"N_" + std::to_string(c), {c * L, y_of(-1)}, false});
    lay.nodes.push_back({"S_" + std::to_string(c), {c * L, y_of(rows)}, false});
  }
  auto link = [&](std::string a, std::string b) {
    lay.links.push_back({std::move(a), std::move(b), lanes_per_road, max_speed, L});
  };
  for (int r = 0; r < rows; ++r) {
    link("W_" + std::to_string(r), iname(r, 0));
    for (int c = 0; c + 1 < cols; ++c) link(iname(r, c), iname(r, c + 1));
    link(iname(r, cols - 1), "E_" + std::to_string(r));
  }
  for (int c = 0; c < cols; ++c) {
    link("N_" + std::to_string(c), iname(0, c));
    for (int r = 0; r + 1 < rows; ++r) link(iname(r, c), iname(r + 1, c));
    link(iname(rows - 1, c), "S_" + std::to_string(c));
  }
  return expand_layout(lay);
}

DemandSpec grid_demand(const NetworkSpec& grid, const std::string& level, double horizon_s) {
  double through = 0.0, turn = 0.0;
  if (level == "low") {
    through = 200.0;
    turn = 50.0;
  } else if (level == "medium") {
    through = 330.0;
    turn = 90.0;
  } else if (level == "high") {
    through = 450.0;
    turn = 130.0;
  } else {
    throw ArgumentError("unknown demand level '" + level + "'");
  }
  // Origins are stubs "<side>_<k>__I_r_c"; destinations "I_r_c__<side>_<k>".
  std::unordered_map<std::string, std::string> dest_by_node;
  for (std::size_t r : grid.destination_roads()) dest_by_node[grid.roads[r].to] = grid.roads[r].id;
  auto count_side = [&](char side) {
    int n = 0;
    while (dest_by_node.count(std::string(1, side) + "_" + std::to_string(n))) ++n;
    return n;
  };
  const int rows = count_side('W'), cols = count_side('N');
  auto dest = [&](char side, int k) { return dest_by_node.at(std::string(1, side) + "_" + std::to_string(k)); };
  auto opposite = [](char s) { return s == 'W' ? 'E' : s == 'E' ? 'W' : s == 'N' ? 'S' : 'N'; };
  // Right/left exits relative to the entry heading.
  auto right_of = [](char s) { return s == 'W' ? 'S' : s == 'S' ? 'E' : s == 'E' ? 'N' : 'W'; };
  auto left_of = [](char s) { return s == 'W' ? 'N' : s == 'N' ? 'E' : s == 'E' ? 'S' : 'W'; };

  DemandSpec d;
  const double end = std::max(1.0, horizon_s - 600.0);
  for (std::size_t r : grid.origin_roads()) {
    const std::string& from = grid.roads[r].from;
    const char side = from[0];
    const int k = std::stoi(from.substr(2));
    const int along = (side == 'W' || side == 'E') ? cols : rows;
    d.flows.push_back({grid.roads[r].id, dest(opposite(side), k), 0.0, end, through});
    const char rs = right_of(side), ls = left_of(side);
    const int rn = (rs == 'W' || rs == 'E') ? rows : cols;
    const int ln = (ls == 'W' || ls == 'E') ? rows : cols;
    d.flows.push_back({grid.roads[r].id, dest(rs, std::min(k, rn - 1)), 0.0, end, turn});
    d.flows.push_back({grid.roads[r].id, dest(ls, std::max(0, std::min(ln - 1, along - 1 - k))), 0.0, end, turn});
  }
  return d;
}

}  // namespace lats::net
