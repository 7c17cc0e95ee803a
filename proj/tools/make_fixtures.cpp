// Writes the committed network and config fixtures (demand included) under a directory.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "lats/common/errors.hpp"
#include "lats/net/builder.hpp"
#include "lats/trainer/config.hpp"

using namespace lats;

namespace {

void write(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
  std::printf("wrote %s\n", path.c_str());
}

std::string node(int r, int c) { return "J_" + std::to_string(r) + "_" + std::to_string(c); }

// 4 x 7 block of 28 signalized junctions with irregular spacing. Two missing
// cross streets and a few dead perimeter approaches leave 3-arm junctions;
// two diagonal avenues create 5-arm junctions. Roads touching a 5-arm
// junction have one lane so every junction stays within 36 movements.
net::NetworkSpec hetero_network() {
  constexpr int R = 4, C = 7;
  const double xs[C] = {0, 210, 380, 600, 790, 1000, 1180};
  const double ys[R] = {720, 480, 260, 0};
  net::Layout lay;
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) lay.nodes.push_back({node(r, c), {xs[c], ys[r]}, true});

  const std::set<std::pair<std::string, std::string>> diagonals{{node(0, 1), node(1, 2)},
                                                                 {node(2, 4), node(3, 5)}};
  std::set<std::string> five;
  for (const auto& [a, b] : diagonals) {
    five.insert(a);
    five.insert(b);
  }
  auto lanes_for = [&](const std::string& a, const std::string& b, int dflt) {
    return (five.count(a) || five.count(b)) ? 1 : dflt;
  };
  auto link = [&](const std::string& a, const std::string& b, int lanes, double speed) {
    lay.links.push_back({a, b, lanes_for(a, b, lanes), speed, 0.0});
  };
  // Arterials east-west carry 3 lanes, cross streets 2.
  for (int r = 0; r < R; ++r)
    for (int c = 0; c + 1 < C; ++c) link(node(r, c), node(r, c + 1), 3, 13.89);
  const std::set<std::pair<int, int>> missing_cross{{1, 3}, {2, 6}};  // (row above, col)
  for (int c = 0; c < C; ++c)
    for (int r = 0; r + 1 < R; ++r)
      if (!missing_cross.count({r, c})) link(node(r, c), node(r + 1, c), 2, 11.11);
  for (const auto& [a, b] : diagonals) link(a, b, 1, 11.11);

  // Boundary approaches; a few perimeter junctions get none on one side.
  const std::set<std::string> dead{"N_5", "S_2", "W_2"};
  auto stub = [&](const std::string& id, const std::string& j, double x, double y, int lanes) {
    if (dead.count(id)) return;
    lay.nodes.push_back({id, {x, y}, false});
    link(id, j, lanes, 13.89);
  };
  for (int c = 0; c < C; ++c) {
    stub("N_" + std::to_string(c), node(0, c), xs[c], ys[0] + 200, 2);
    stub("S_" + std::to_string(c), node(R - 1, c), xs[c], ys[R - 1] - 200, 2);
  }
  for (int r = 0; r < R; ++r) {
    stub("W_" + std::to_string(r), node(r, 0), xs[0] - 200, ys[r], 3);
    stub("E_" + std::to_string(r), node(r, C - 1), xs[C - 1] + 200, ys[r], 3);
  }
  return net::expand_layout(lay);
}

// Each entry sends a main flow to the farthest exit and two lighter flows to
// exits a quarter and half way round the boundary.
net::DemandSpec hetero_demand(const net::NetworkSpec& n, double horizon_s) {
  std::vector<std::size_t> in = n.origin_roads(), out = n.destination_roads();
  net::DemandSpec d;
  const double end = std::max(1.0, horizon_s - 600.0);
  for (std::size_t k = 0; k < in.size(); ++k) {
    const auto& o = n.roads[in[k]];
    std::size_t far = out[0];
    double best = -1.0;
    for (std::size_t r : out) {
      if (n.roads[r].to == o.from) continue;
      const double dx = n.roads[r].shape_to.x - o.shape_from.x, dy = n.roads[r].shape_to.y - o.shape_from.y;
      if (dx * dx + dy * dy > best) {
        best = dx * dx + dy * dy;
        far = r;
      }
    }
    d.flows.push_back({o.id, n.roads[far].id, 0.0, end, 180.0});
    for (std::size_t step : {out.size() / 4, out.size() / 2}) {
      const std::size_t r = out[(k + step) % out.size()];
      if (n.roads[r].to == o.from || r == far) continue;
      d.flows.push_back({o.id, n.roads[r].id, 0.0, end, 60.0});
    }
  }
  net::validate_demand(d, n);
  return d;
}

void report(const std::string& name, const net::NetworkSpec& n) {
  std::map<std::size_t, int> arms;
  std::size_t max_m = 0, max_p = 0;
  for (std::size_t i = 0; i < n.intersections.size(); ++i) {
    const auto& ix = n.intersection_index_data(i);
    ++arms[ix.incoming_roads.size()];
    max_m = std::max(max_m, ix.movements.size());
    max_p = std::max(max_p, n.intersections[i].phases.size());
  }
  std::printf("%s: %zu intersections, max %zu movements, max %zu phases;", name.c_str(), n.intersections.size(),
              max_m, max_p);
  for (auto [a, k] : arms) std::printf(" %zu-arm x%d", a, k);
  std::printf("\n");
  if (max_m > 36 || max_p > 8) throw Error(name + " exceeds the padding limits");
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "fixtures";
  try {
    net::NetworkSpec grid = net::build_grid(2, 2);
    report("grid2x2", grid);
    write(dir + "/grid2x2.json", net::render_network(grid));
    for (const char* level : {"low", "medium", "high"})
      write(dir + "/grid2x2_" + level + ".json", net::render_demand(net::grid_demand(grid, level)));

    net::NetworkSpec single = net::build_grid(1, 1);
    write(dir + "/single.json", net::render_network(single));
    write(dir + "/single_medium.json", net::render_demand(net::grid_demand(single, "medium")));

    net::NetworkSpec het = hetero_network();
    report("hetero28", het);
    write(dir + "/hetero28.json", net::render_network(het));
    write(dir + "/hetero28_demand.json", net::render_demand(hetero_demand(het, 3600.0)));

    // Desk-scale learning run on the 2x2 grid.
    trainer::TrainConfig desk;
    desk.lr = 1e-3;
    desk.minibatch = 128;
    desk.reward_scale = 1e-3;
    desk.episodes = 300;
    desk.seed = 1;
    write(dir + "/desk.json", trainer::render_config(desk));

    // Short episodes so two full runs fit in a test budget.
    trainer::TrainConfig smoke = desk;
    smoke.episodes = 50;
    smoke.horizon_s = 600;
    smoke.epochs = 2;
    write(dir + "/smoke.json", trainer::render_config(smoke));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "make_fixtures: %s\n", e.what());
    return 1;
  }
  return 0;
}
