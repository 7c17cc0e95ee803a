#pragma once

#include <string>
#include <vector>

#include "lats/net/demand.hpp"
#include "lats/net/network.hpp"

namespace lats::net {

/// Declarative node/link description expanded into a full NetworkSpec:
/// two-way roads with their lanes, plus the turn movements and phase catalog
/// derived from them.
struct LayoutNode {
  std::string id;
  Point position;
  bool signalized = true;
};

struct LayoutLink {
  std::string a;
  std::string b;
  int lanes = 1;
  double max_speed = 13.89;
  double length = 0.0;  // 0 = euclidean distance
};

struct Layout {
  std::vector<LayoutNode> nodes;
  std::vector<LayoutLink> links;
};

/// Expands a layout. 4-arm intersections get the 8-phase catalog, 3-arm nodes
/// get 2-3 phases and 5-arm nodes one phase per approach.
NetworkSpec expand_layout(const Layout& layout, const PhaseTypeMap& types = {});

/// rows x cols grid of identical 4-arm intersections with boundary stubs on
/// every outer approach. Throws ArgumentError on non-positive dimensions.
NetworkSpec build_grid(int rows, int cols, double lane_length = 200.0, int lanes_per_road = 3,
                       double max_speed = 13.89);

/// Per-origin flows across a grid at a named level ("low", "medium", "high").
DemandSpec grid_demand(const NetworkSpec& grid, const std::string& level, double horizon_s = 3600.0);

}  // namespace lats::net
