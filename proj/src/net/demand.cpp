#include "lats/net/demand.hpp"

#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include "json.hpp"
#include "lats/common/errors.hpp"
#include "lats/net/network.hpp"

namespace lats::net {

using nlohmann::json;

DemandSpec load_demand(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("demand document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("flows") || !doc["flows"].is_array()) {
    throw SchemaError("demand document needs a 'flows' array");
  }
  DemandSpec d;
  for (const json& j : doc["flows"]) {
    FlowSpec f;
    try {
      f.origin = j.at("origin").get<std::string>();
      f.destination = j.at("destination").get<std::string>();
      f.start_s = j.at("start_s").get<double>();
      f.end_s = j.at("end_s").get<double>();
      f.rate_veh_per_h = j.at("rate_veh_per_h").get<double>();
    } catch (const json::exception& e) {
      throw SchemaError(std::string("malformed flow: ") + e.what());
    }
    if (!(f.end_s > f.start_s)) throw SchemaError("flow " + f.origin + " -> " + f.destination + " has end <= start");
    if (!(f.rate_veh_per_h >= 0.0) || !std::isfinite(f.rate_veh_per_h)) {
      throw SchemaError("flow " + f.origin + " -> " + f.destination + " has a negative rate");
    }
    d.flows.push_back(std::move(f));
  }
  if (doc.contains("seed_hint") && !doc["seed_hint"].is_null()) {
    if (!doc["seed_hint"].is_number_unsigned()) throw SchemaError("seed_hint must be a non-negative integer");
    d.seed_hint = doc["seed_hint"].get<std::uint64_t>();
  }
  return d;
}

DemandSpec load_demand_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open demand file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_demand(ss.str());
}

std::string render_demand(const DemandSpec& d) {
  json flows = json::array();
  for (const FlowSpec& f : d.flows) {
    flows.push_back({{"origin", f.origin},
                     {"destination", f.destination},
                     {"start_s", f.start_s},
                     {"end_s", f.end_s},
                     {"rate_veh_per_h", f.rate_veh_per_h}});
  }
  json doc{{"flows", std::move(flows)}};
  if (d.seed_hint) doc["seed_hint"] = *d.seed_hint;
  return doc.dump(1);
}

void validate_demand(const DemandSpec& d, const NetworkSpec& net) {
  // Road-level successor graph induced by movements.
  std::vector<std::vector<std::size_t>> next(net.roads.size());
  for (std::size_t m = 0; m < net.movements.size(); ++m) {
    const MovementIndex& mi = net.movement_index(m);
    next[mi.in_road].push_back(mi.out_road);
  }
  for (const FlowSpec& f : d.flows) {
    auto o = net.find_road(f.origin);
    auto t = net.find_road(f.destination);
    if (!o) throw TopologyError("flow origin '" + f.origin + "' is not a road");
    if (!t) throw TopologyError("flow destination '" + f.destination + "' is not a road");
    if (!net.is_origin_road(*o)) throw TopologyError("flow origin '" + f.origin + "' is not a boundary entry");
    if (!net.is_destination_road(*t)) {
      throw TopologyError("flow destination '" + f.destination + "' is not a boundary exit");
    }
    std::vector<char> seen(net.roads.size(), 0);
    std::queue<std::size_t> q;
    q.push(*o);
    seen[*o] = 1;
    while (!q.empty() && !seen[*t]) {
      std::size_t r = q.front();
      q.pop();
      for (std::size_t n : next[r])
        if (!seen[n]) {
          seen[n] = 1;
          q.push(n);
        }
    }
    if (!seen[*t]) throw TopologyError("flow " + f.origin + " -> " + f.destination + " is unreachable");
  }
}

double expected_insertions(const FlowSpec& f) {
  // Integer ticks t with start <= t < end each add rate; one vehicle per 3600.
  const double first = std::ceil(f.start_s);
  const double ticks = std::max(0.0, std::ceil(f.end_s) - first);
  return std::floor(ticks * f.rate_veh_per_h / 3600.0 + 1e-9);
}

}  // namespace lats::net
