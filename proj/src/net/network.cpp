#include "lats/net/network.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lats/common/errors.hpp"
#include "lats/net/geometry.hpp"

namespace lats::net {

using nlohmann::json;

std::string_view to_string(TypeTag tag) {
  switch (tag) {
    case TypeTag::three_phase:
      return "three_phase";
    case TypeTag::four_phase:
      return "four_phase";
    case TypeTag::five_phase:
      return "five_phase";
  }
  return "four_phase";
}

TypeTag type_tag_from_string(std::string_view s) {
  if (s == "three_phase") return TypeTag::three_phase;
  if (s == "four_phase") return TypeTag::four_phase;
  if (s == "five_phase") return TypeTag::five_phase;
  throw SchemaError("unknown type_tag '" + std::string(s) + "'");
}

TypeTag PhaseTypeMap::lookup(std::size_t phase_count) const {
  auto it = by_phase_count.find(static_cast<int>(phase_count));
  if (it == by_phase_count.end()) {
    throw TopologyError("no type tag mapped for " + std::to_string(phase_count) + " phases");
  }
  return it->second;
}

namespace {

template <typename T>
void index_ids(const std::vector<T>& items, std::unordered_map<std::string, std::size_t>& out,
               const char* what) {
  out.clear();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].id.empty()) throw TopologyError(std::string("empty ") + what + " id");
    if (!out.emplace(items[i].id, i).second) {
      throw TopologyError(std::string("duplicate ") + what + " id '" + items[i].id + "'");
    }
  }
}

std::optional<std::size_t> find_in(const std::unordered_map<std::string, std::size_t>& m,
                                   std::string_view id) {
  auto it = m.find(std::string(id));
  if (it == m.end()) return std::nullopt;
  return it->second;
}

}  // namespace

std::optional<std::size_t> NetworkSpec::find_intersection(std::string_view id) const {
  return find_in(int_by_id_, id);
}
std::optional<std::size_t> NetworkSpec::find_road(std::string_view id) const {
  return find_in(road_by_id_, id);
}
std::optional<std::size_t> NetworkSpec::find_lane(std::string_view id) const {
  return find_in(lane_by_id_, id);
}
std::optional<std::size_t> NetworkSpec::find_movement(std::string_view id) const {
  return find_in(mov_by_id_, id);
}

std::size_t NetworkSpec::intersection_index(std::string_view id) const {
  auto i = find_intersection(id);
  if (!i) throw UnknownIntersection("unknown intersection '" + std::string(id) + "'");
  return *i;
}

std::vector<std::size_t> NetworkSpec::origin_roads() const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < roads.size(); ++r)
    if (is_origin_road(r)) out.push_back(r);
  return out;
}

std::vector<std::size_t> NetworkSpec::destination_roads() const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < roads.size(); ++r)
    if (is_destination_road(r)) out.push_back(r);
  return out;
}

NetworkSpec NetworkSpec::validated(NetworkSpec net, const PhaseTypeMap& types, bool check_phases) {
  if (net.schema_version != kSchemaVersion) {
    throw VersionError("unsupported schema_version " + std::to_string(net.schema_version));
  }
  index_ids(net.intersections, net.int_by_id_, "intersection");
  index_ids(net.roads, net.road_by_id_, "road");
  index_ids(net.lanes, net.lane_by_id_, "lane");
  index_ids(net.movements, net.mov_by_id_, "movement");

  const std::size_t n_int = net.intersections.size();
  const std::size_t n_road = net.roads.size();

  net.road_to_int_.assign(n_road, std::nullopt);
  net.road_from_int_.assign(n_road, std::nullopt);
  for (std::size_t r = 0; r < n_road; ++r) {
    const RoadSpec& road = net.roads[r];
    if (!(road.length > 0.0)) throw TopologyError("road '" + road.id + "' has non-positive length");
    if (!(road.max_speed > 0.0)) throw TopologyError("road '" + road.id + "' has non-positive speed");
    if (road.from == road.to) throw TopologyError("road '" + road.id + "' is a self loop");
    net.road_from_int_[r] = net.find_intersection(road.from);
    net.road_to_int_[r] = net.find_intersection(road.to);
    if (!net.road_from_int_[r] && !net.road_to_int_[r]) {
      throw TopologyError("road '" + road.id + "' touches no intersection");
    }
  }

  net.lane_road_.assign(net.lanes.size(), 0);
  net.road_lanes_.assign(n_road, {});
  for (std::size_t l = 0; l < net.lanes.size(); ++l) {
    auto r = net.find_road(net.lanes[l].road);
    if (!r) {
      throw TopologyError("lane '" + net.lanes[l].id + "' references unknown road '" +
                          net.lanes[l].road + "'");
    }
    net.lane_road_[l] = *r;
    net.road_lanes_[*r].push_back(l);
  }
  for (std::size_t r = 0; r < n_road; ++r) {
    auto& ls = net.road_lanes_[r];
    std::sort(ls.begin(), ls.end(),
              [&](std::size_t a, std::size_t b) { return net.lanes[a].index < net.lanes[b].index; });
    if (static_cast<int>(ls.size()) != net.roads[r].lane_count || ls.empty()) {
      throw TopologyError("road '" + net.roads[r].id + "' declares " +
                          std::to_string(net.roads[r].lane_count) + " lanes but has " +
                          std::to_string(ls.size()));
    }
    for (std::size_t k = 0; k < ls.size(); ++k) {
      if (net.lanes[ls[k]].index != static_cast<int>(k)) {
        throw TopologyError("road '" + net.roads[r].id + "' lane indices are not 0..n-1");
      }
    }
  }

  net.movement_idx_.assign(net.movements.size(), {});
  net.intersection_idx_.assign(n_int, {});
  for (std::size_t m = 0; m < net.movements.size(); ++m) {
    const MovementSpec& mv = net.movements[m];
    auto i = net.find_intersection(mv.intersection);
    if (!i) throw TopologyError("movement '" + mv.id + "' references unknown intersection");
    auto li = net.find_lane(mv.in_lane);
    auto lo = net.find_lane(mv.out_lane);
    if (!li) throw TopologyError("movement '" + mv.id + "' references unknown lane '" + mv.in_lane + "'");
    if (!lo) throw TopologyError("movement '" + mv.id + "' references unknown lane '" + mv.out_lane + "'");
    std::size_t ri = net.lane_road_[*li];
    std::size_t ro = net.lane_road_[*lo];
    if (ri == ro) throw TopologyError("movement '" + mv.id + "' connects lanes of the same road");
    if (net.road_to_int_[ri] != i || net.road_from_int_[ro] != i) {
      throw TopologyError("movement '" + mv.id + "' lanes do not meet at '" + mv.intersection + "'");
    }
    net.movement_idx_[m] = MovementIndex{*i, *li, *lo, ri, ro};
    net.intersection_idx_[*i].movements.push_back(m);
  }

  std::set<std::string> phase_ids;
  for (std::size_t i = 0; i < n_int; ++i) {
    IntersectionSpec& is = net.intersections[i];
    IntersectionIndex& ix = net.intersection_idx_[i];
    if (ix.movements.empty()) throw TopologyError("intersection '" + is.id + "' has no movements");
    if (check_phases && is.phases.size() < 2) throw TopologyError("intersection '" + is.id + "' has fewer than 2 phases");

    is.movement_ids.clear();
    std::unordered_map<std::size_t, std::size_t> local;
    for (std::size_t k = 0; k < ix.movements.size(); ++k) {
      is.movement_ids.push_back(net.movements[ix.movements[k]].id);
      local[ix.movements[k]] = k;
    }

    for (std::size_t r = 0; r < n_road; ++r) {
      if (net.road_to_int_[r] == i) ix.incoming_roads.push_back(r);
      if (net.road_from_int_[r] == i) ix.outgoing_roads.push_back(r);
    }
    is.incoming_lane_ids.clear();
    is.outgoing_lane_ids.clear();
    for (std::size_t r : ix.incoming_roads)
      for (std::size_t l : net.road_lanes_[r]) {
        ix.incoming_lanes.push_back(l);
        is.incoming_lane_ids.push_back(net.lanes[l].id);
      }
    for (std::size_t r : ix.outgoing_roads)
      for (std::size_t l : net.road_lanes_[r]) {
        ix.outgoing_lanes.push_back(l);
        is.outgoing_lane_ids.push_back(net.lanes[l].id);
      }

    ix.phase_local.clear();
    for (const PhaseSpec& ph : is.phases) {
      if (!phase_ids.insert(ph.id).second) throw TopologyError("duplicate phase id '" + ph.id + "'");
      if (ph.movement_ids.empty()) throw TopologyError("phase '" + ph.id + "' activates no movement");
      std::vector<std::size_t> loc;
      std::vector<std::size_t> glob;
      for (const std::string& mid : ph.movement_ids) {
        auto m = net.find_movement(mid);
        if (!m) throw TopologyError("phase '" + ph.id + "' references unknown movement '" + mid + "'");
        auto it = local.find(*m);
        if (it == local.end()) {
          throw TopologyError("phase '" + ph.id + "' movement '" + mid + "' belongs to another intersection");
        }
        if (std::find(loc.begin(), loc.end(), it->second) != loc.end()) {
          throw TopologyError("phase '" + ph.id + "' lists movement '" + mid + "' twice");
        }
        loc.push_back(it->second);
        glob.push_back(*m);
      }
      for (std::size_t a = 0; check_phases && a < glob.size(); ++a)
        for (std::size_t b = a + 1; b < glob.size(); ++b)
          if (movements_conflict(net, glob[a], glob[b])) {
            throw TopologyError("phase '" + ph.id + "' activates conflicting movements '" +
                                net.movements[glob[a]].id + "' and '" + net.movements[glob[b]].id + "'");
          }
      ix.phase_local.push_back(std::move(loc));
    }
    if (check_phases && types.lookup(is.phases.size()) != is.type_tag) {
      throw TopologyError("intersection '" + is.id + "' type_tag " + std::string(to_string(is.type_tag)) +
                          " does not match " + std::to_string(is.phases.size()) + " phases");
    }
  }
  return net;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <typename T>
T get(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(std::string(where) + ": missing key '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string(where) + ": bad value for '" + key + "': " + e.what());
  }
}

const json& get_array(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw SchemaError(std::string("missing array '") + key + "'");
  }
  return j.at(key);
}

Point point_from(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw SchemaError("shape point must be [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

NetworkSpec load_network(std::string_view text, const PhaseTypeMap& types) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("network document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("network document must be an object");

  NetworkSpec net;
  net.schema_version = get<int>(doc, "schema_version", "network");
  if (net.schema_version != kSchemaVersion) {
    throw VersionError("unsupported schema_version " + std::to_string(net.schema_version));
  }

  for (const json& j : get_array(doc, "intersections")) {
    IntersectionSpec is;
    is.id = get<std::string>(j, "id", "intersection");
    is.position = {get<double>(j, "x", "intersection"), get<double>(j, "y", "intersection")};
    is.type_tag = type_tag_from_string(get<std::string>(j, "type_tag", "intersection"));
    net.intersections.push_back(std::move(is));
  }
  for (const json& j : get_array(doc, "roads")) {
    RoadSpec r;
    r.id = get<std::string>(j, "id", "road");
    r.from = get<std::string>(j, "from", "road");
    r.to = get<std::string>(j, "to", "road");
    r.length = get<double>(j, "length", "road");
    r.max_speed = get<double>(j, "max_speed", "road");
    r.lane_count = get<int>(j, "lane_count", "road");
    const json& shape = get_array(j, "shape");
    if (shape.size() != 2) throw SchemaError("road '" + r.id + "' shape must have two points");
    r.shape_from = point_from(shape[0]);
    r.shape_to = point_from(shape[1]);
    net.roads.push_back(std::move(r));
  }
  for (const json& j : get_array(doc, "lanes")) {
    net.lanes.push_back({get<std::string>(j, "id", "lane"), get<std::string>(j, "road", "lane"),
                         get<int>(j, "index", "lane")});
  }
  for (const json& j : get_array(doc, "movements")) {
    net.movements.push_back({get<std::string>(j, "id", "movement"),
                             get<std::string>(j, "intersection", "movement"),
                             get<std::string>(j, "in_lane", "movement"),
                             get<std::string>(j, "out_lane", "movement")});
  }
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < net.intersections.size(); ++i) by_id[net.intersections[i].id] = i;
  for (const json& j : get_array(doc, "phases")) {
    PhaseSpec ph;
    ph.id = get<std::string>(j, "id", "phase");
    std::string owner = get<std::string>(j, "intersection", "phase");
    ph.movement_ids = get<std::vector<std::string>>(j, "movements", "phase");
    auto it = by_id.find(owner);
    if (it == by_id.end()) {
      throw TopologyError("phase '" + ph.id + "' references unknown intersection '" + owner + "'");
    }
    net.intersections[it->second].phases.push_back(std::move(ph));
  }
  return NetworkSpec::validated(std::move(net), types);
}

NetworkSpec load_network_file(const std::string& path, const PhaseTypeMap& types) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open network file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_network(ss.str(), types);
}

std::string render_network(const NetworkSpec& net) {
  json doc;
  doc["schema_version"] = net.schema_version;
  json ints = json::array(), roads = json::array(), lanes = json::array(), movs = json::array(),
       phases = json::array();
  for (const auto& is : net.intersections) {
    ints.push_back({{"id", is.id},
                    {"x", is.position.x},
                    {"y", is.position.y},
                    {"type_tag", std::string(to_string(is.type_tag))}});
    for (const auto& ph : is.phases) {
      phases.push_back({{"id", ph.id}, {"intersection", is.id}, {"movements", ph.movement_ids}});
    }
  }
  for (const auto& r : net.roads) {
    roads.push_back({{"id", r.id},
                     {"from", r.from},
                     {"to", r.to},
                     {"length", r.length},
                     {"max_speed", r.max_speed},
                     {"lane_count", r.lane_count},
                     {"shape", {{r.shape_from.x, r.shape_from.y}, {r.shape_to.x, r.shape_to.y}}}});
  }
  for (const auto& l : net.lanes) lanes.push_back({{"id", l.id}, {"road", l.road}, {"index", l.index}});
  for (const auto& m : net.movements) {
    movs.push_back({{"id", m.id},
                    {"intersection", m.intersection},
                    {"in_lane", m.in_lane},
                    {"out_lane", m.out_lane}});
  }
  doc["intersections"] = std::move(ints);
  doc["roads"] = std::move(roads);
  doc["lanes"] = std::move(lanes);
  doc["movements"] = std::move(movs);
  doc["phases"] = std::move(phases);
  return doc.dump(1);
}

}  // namespace lats::net
