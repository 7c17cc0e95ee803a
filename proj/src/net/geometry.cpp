#include "lats/net/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lats::net {

namespace {

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

int sign(double v) {
  constexpr double eps = 1e-9;
  return v > eps ? 1 : (v < -eps ? -1 : 0);
}

}  // namespace

double road_bearing(const NetworkSpec& net, std::size_t intersection, std::size_t road) {
  const Point c = net.intersections[intersection].position;
  const RoadSpec& r = net.roads[road];
  const bool incoming = net.road_to_intersection(road) == intersection;
  const Point far = incoming ? r.shape_from : r.shape_to;
  return std::atan2(far.y - c.y, far.x - c.x);
}

double turn_angle(const NetworkSpec& net, std::size_t intersection, std::size_t in_road,
                  std::size_t out_road) {
  const double heading_in = road_bearing(net, intersection, in_road) + std::numbers::pi;
  const double heading_out = road_bearing(net, intersection, out_road);
  return wrap_angle(heading_out - heading_in);
}

Turn classify_turn(double angle) {
  constexpr double q = std::numbers::pi / 4.0;
  if (std::abs(angle) > 3.0 * q) return Turn::uturn;
  if (angle > q) return Turn::left;
  if (angle < -q) return Turn::right;
  return Turn::through;
}

Segment movement_path(const NetworkSpec& net, std::size_t movement, const JunctionGeometry& geo) {
  const MovementIndex& mi = net.movement_index(movement);
  const IntersectionIndex& ix = net.intersection_index_data(mi.intersection);
  int max_lanes = 1;
  for (std::size_t r : ix.incoming_roads) max_lanes = std::max(max_lanes, net.roads[r].lane_count);
  for (std::size_t r : ix.outgoing_roads) max_lanes = std::max(max_lanes, net.roads[r].lane_count);
  const double radius = geo.base_radius + geo.lane_width * max_lanes;
  const Point c = net.intersections[mi.intersection].position;

  const double th = road_bearing(net, mi.intersection, mi.in_road);
  const double off_in = geo.lane_width * (net.lanes[mi.in_lane].index + 0.5);
  // Incoming lanes sit on the right of a vehicle heading into the junction.
  Point a{c.x + radius * std::cos(th) - off_in * std::sin(th),
          c.y + radius * std::sin(th) + off_in * std::cos(th)};

  const double ph = road_bearing(net, mi.intersection, mi.out_road);
  const double off_out = geo.lane_width * (net.lanes[mi.out_lane].index + 0.5);
  Point b{c.x + radius * std::cos(ph) + off_out * std::sin(ph),
          c.y + radius * std::sin(ph) - off_out * std::cos(ph)};
  return {a, b};
}

bool segments_cross(const Segment& s, const Segment& t) {
  const int d1 = sign(cross(t.a, t.b, s.a));
  const int d2 = sign(cross(t.a, t.b, s.b));
  const int d3 = sign(cross(s.a, s.b, t.a));
  const int d4 = sign(cross(s.a, s.b, t.b));
  return d1 * d2 < 0 && d3 * d4 < 0;
}

bool movements_conflict(const NetworkSpec& net, std::size_t m1, std::size_t m2,
                        const JunctionGeometry& geo) {
  const MovementIndex& a = net.movement_index(m1);
  const MovementIndex& b = net.movement_index(m2);
  if (a.in_road == b.in_road) return false;
  if (classify_turn(turn_angle(net, a.intersection, a.in_road, a.out_road)) == Turn::right) return false;
  if (classify_turn(turn_angle(net, b.intersection, b.in_road, b.out_road)) == Turn::right) return false;
  if (a.out_lane == b.out_lane) return true;
  return segments_cross(movement_path(net, m1, geo), movement_path(net, m2, geo));
}

}  // namespace lats::net
