#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lats::net {

class NetworkSpec;

struct FlowSpec {
  std::string origin;       // boundary road entering the network
  std::string destination;  // boundary road leaving the network
  double start_s = 0.0;
  double end_s = 0.0;
  double rate_veh_per_h = 0.0;
  bool operator==(const FlowSpec&) const = default;
};

struct DemandSpec {
  std::vector<FlowSpec> flows;
  std::optional<std::uint64_t> seed_hint;
  bool operator==(const DemandSpec&) const = default;
};

/// Parses a demand document. Throws SchemaError on malformed input or
/// end <= start / negative rates.
DemandSpec load_demand(std::string_view text);
DemandSpec load_demand_file(const std::string& path);
std::string render_demand(const DemandSpec& demand);

/// Checks origins/destinations against a network (boundary roads, reachability).
void validate_demand(const DemandSpec& demand, const NetworkSpec& net);

/// Vehicles a flow inserts under exact-rate accumulation starting from an
/// empty accumulator.
double expected_insertions(const FlowSpec& flow);

}  // namespace lats::net
