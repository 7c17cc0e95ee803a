#pragma once

#include <cstddef>

#include "lats/net/network.hpp"

namespace lats::net {

enum class Turn { left, through, right, uturn };

/// Lane width and junction radius used to lay out lane-center paths.
struct JunctionGeometry {
  double lane_width = 3.2;
  double base_radius = 4.0;
};

/// Bearing (radians) from an intersection towards the far end of an incident road.
double road_bearing(const NetworkSpec& net, std::size_t intersection, std::size_t road);

/// Signed turn angle in (-pi, pi]; positive turns left (counter-clockwise).
double turn_angle(const NetworkSpec& net, std::size_t intersection, std::size_t in_road,
                  std::size_t out_road);
Turn classify_turn(double angle);

struct Segment {
  Point a;
  Point b;
};

/// Straight lane-center path across the junction for a movement.
Segment movement_path(const NetworkSpec& net, std::size_t movement,
                      const JunctionGeometry& geo = {});

/// Two movements conflict iff their paths cross inside the junction or they
/// merge into the same outgoing lane. Movements sharing an incoming road and
/// right turns never conflict.
bool movements_conflict(const NetworkSpec& net, std::size_t m1, std::size_t m2,
                        const JunctionGeometry& geo = {});

bool segments_cross(const Segment& s, const Segment& t);

}  // namespace lats::net
