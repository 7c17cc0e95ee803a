#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lats::net {

inline constexpr int kSchemaVersion = 1;

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

enum class TypeTag { three_phase = 0, four_phase = 1, five_phase = 2 };
inline constexpr int kNumTypeTags = 3;

std::string_view to_string(TypeTag tag);
TypeTag type_tag_from_string(std::string_view s);

/// Maps a phase count (2..8) to the intersection's phase-setting type.
struct PhaseTypeMap {
  std::map<int, TypeTag> by_phase_count{
      {2, TypeTag::three_phase}, {3, TypeTag::three_phase}, {4, TypeTag::four_phase},
      {5, TypeTag::five_phase},  {6, TypeTag::five_phase},  {7, TypeTag::five_phase},
      {8, TypeTag::four_phase}};

  TypeTag lookup(std::size_t phase_count) const;
};

struct LaneSpec {
  std::string id;
  std::string road;
  int index = 0;  // 0 = leftmost (median side)
  bool operator==(const LaneSpec&) const = default;
};

struct RoadSpec {
  std::string id;
  std::string from;  // node id; an id that is not an intersection is a boundary node
  std::string to;
  double length = 0.0;     // m
  double max_speed = 0.0;  // m/s
  int lane_count = 0;
  Point shape_from;
  Point shape_to;
  bool operator==(const RoadSpec&) const = default;
};

struct MovementSpec {
  std::string id;
  std::string intersection;
  std::string in_lane;
  std::string out_lane;
  bool operator==(const MovementSpec&) const = default;
};

struct PhaseSpec {
  std::string id;
  std::vector<std::string> movement_ids;
  bool operator==(const PhaseSpec&) const = default;
};

struct IntersectionSpec {
  std::string id;
  Point position;
  TypeTag type_tag = TypeTag::four_phase;
  std::vector<PhaseSpec> phases;
  // Derived on validation; canonical orders follow document order.
  std::vector<std::string> movement_ids;
  std::vector<std::string> incoming_lane_ids;
  std::vector<std::string> outgoing_lane_ids;
  bool operator==(const IntersectionSpec&) const = default;
};

/// Integer cross references resolved once at validation time.
struct MovementIndex {
  std::size_t intersection = 0;
  std::size_t in_lane = 0;
  std::size_t out_lane = 0;
  std::size_t in_road = 0;
  std::size_t out_road = 0;
};

struct IntersectionIndex {
  std::vector<std::size_t> movements;                 // canonical movement order
  std::vector<std::vector<std::size_t>> phase_local;  // phase -> local movement positions
  std::vector<std::size_t> incoming_lanes;
  std::vector<std::size_t> outgoing_lanes;
  std::vector<std::size_t> incoming_roads;
  std::vector<std::size_t> outgoing_roads;
};

/// Immutable, validated traffic network. Construct through load_network,
/// build_grid or NetworkSpec::validated.
class NetworkSpec {
 public:
  int schema_version = kSchemaVersion;
  std::vector<IntersectionSpec> intersections;
  std::vector<RoadSpec> roads;
  std::vector<LaneSpec> lanes;
  std::vector<MovementSpec> movements;

  /// Validates every invariant and resolves indices. Throws TopologyError.
  /// With check_phases=false only structural references are checked (used
  /// while a phase catalog is still being generated).
  static NetworkSpec validated(NetworkSpec raw, const PhaseTypeMap& types = {},
                               bool check_phases = true);

  bool operator==(const NetworkSpec& o) const {
    return schema_version == o.schema_version && intersections == o.intersections &&
           roads == o.roads && lanes == o.lanes && movements == o.movements;
  }

  std::optional<std::size_t> find_intersection(std::string_view id) const;
  std::optional<std::size_t> find_road(std::string_view id) const;
  std::optional<std::size_t> find_lane(std::string_view id) const;
  std::optional<std::size_t> find_movement(std::string_view id) const;

  std::size_t intersection_index(std::string_view id) const;  // throws UnknownIntersection

  const MovementIndex& movement_index(std::size_t m) const { return movement_idx_[m]; }
  const IntersectionIndex& intersection_index_data(std::size_t i) const {
    return intersection_idx_[i];
  }
  std::size_t lane_road(std::size_t lane) const { return lane_road_[lane]; }
  const std::vector<std::size_t>& road_lanes(std::size_t road) const { return road_lanes_[road]; }
  /// Intersection at the downstream end of a road, if any.
  std::optional<std::size_t> road_to_intersection(std::size_t road) const {
    return road_to_int_[road];
  }
  std::optional<std::size_t> road_from_intersection(std::size_t road) const {
    return road_from_int_[road];
  }
  bool is_origin_road(std::size_t road) const { return !road_from_int_[road].has_value(); }
  bool is_destination_road(std::size_t road) const { return !road_to_int_[road].has_value(); }
  std::vector<std::size_t> origin_roads() const;
  std::vector<std::size_t> destination_roads() const;

 private:
  std::unordered_map<std::string, std::size_t> int_by_id_, road_by_id_, lane_by_id_, mov_by_id_;
  std::vector<MovementIndex> movement_idx_;
  std::vector<IntersectionIndex> intersection_idx_;
  std::vector<std::size_t> lane_road_;
  std::vector<std::vector<std::size_t>> road_lanes_;
  std::vector<std::optional<std::size_t>> road_to_int_, road_from_int_;
};

/// Loads and validates a network document (JSON). Throws SchemaError,
/// TopologyError or VersionError.
NetworkSpec load_network(std::string_view spec_text, const PhaseTypeMap& types = {});
NetworkSpec load_network_file(const std::string& path, const PhaseTypeMap& types = {});
std::string render_network(const NetworkSpec& spec);

}  // namespace lats::net
