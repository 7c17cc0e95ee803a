#include "lats/ts/prompt.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "lats/common/errors.hpp"
#include "lats/common/hash.hpp"

namespace lats::ts {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

int count_of(double normalized, int cap) { return static_cast<int>(std::lround(normalized * cap)); }

const char* type_words(net::TypeTag t) {
  switch (t) {
    case net::TypeTag::three_phase: return "three-phase";
    case net::TypeTag::four_phase: return "four-phase";
    case net::TypeTag::five_phase: return "five-phase";
  }
  return "unknown";
}

void describe_roads(std::ostringstream& os, const net::NetworkSpec& net, const std::vector<std::size_t>& roads,
                    const char* direction) {
  os << "It has " << roads.size() << ' ' << direction << " roads.";
  for (std::size_t r : roads) {
    const net::RoadSpec& rs = net.roads[r];
    os << ' ' << (direction[0] == 'i' ? "Incoming" : "Outgoing") << " road " << rs.id << " is "
       << fmt("%.0f", rs.length) << " meters long with a speed limit of " << fmt("%.1f", rs.max_speed)
       << " m/s and " << rs.lane_count << (rs.lane_count == 1 ? " lane." : " lanes.");
  }
}

}  // namespace

std::string render_topology(const net::NetworkSpec& net, std::size_t i) {
  if (i >= net.intersections.size()) throw UnknownIntersection("render_topology: bad intersection index");
  const auto& is = net.intersections[i];
  const auto& ix = net.intersection_index_data(i);
  std::ostringstream os;
  os << "Intersection topology: intersection " << is.id << " is a " << type_words(is.type_tag)
     << " intersection with " << is.phases.size() << " signal phases and " << ix.movements.size()
     << " traffic movements. ";
  describe_roads(os, net, ix.incoming_roads, "incoming");
  os << ' ';
  describe_roads(os, net, ix.outgoing_roads, "outgoing");
  os << '\n';
  return os.str();
}

PromptDoc render_prompt(const obs::PhasePromptSource& src, const net::NetworkSpec& net) {
  const std::size_t i = src.intersection;
  if (i >= net.intersections.size()) throw UnknownIntersection("render_prompt: bad intersection index");
  const auto& is = net.intersections[i];
  const auto& ix = net.intersection_index_data(i);
  if (src.phase >= is.phases.size()) throw ShapeError("render_prompt: phase out of range");

  std::ostringstream os;
  os << render_topology(net, i);
  const auto& active = ix.phase_local[src.phase];
  os << "Traffic dynamics: phase " << is.phases[src.phase].id << " activates " << active.size()
     << " movements. Vehicle counts over the last " << src.steps.size() << " steps, oldest first:\n";
  const int cap = src.detector_cap;
  for (std::size_t k : active) {
    const auto& mi = net.movement_index(ix.movements[k]);
    os << "Movement from lane " << net.lanes[mi.in_lane].id << " to lane " << net.lanes[mi.out_lane].id << ":";
    for (std::size_t t = 0; t < src.steps.size(); ++t) {
      const double* row = &src.steps[t][k * obs::kStateCols];
      const std::size_t back = src.steps.size() - 1 - t;
      os << (t ? ";" : "") << " step t" << (back ? "-" + std::to_string(back) : std::string())
         << (row[0] > 0.5 ? " green," : " red,") << " incoming " << count_of(row[1], cap) << " stopped "
         << count_of(row[3], cap) << " moving, outgoing " << count_of(row[2], cap) << " stopped "
         << count_of(row[4], cap) << " moving";
    }
    os << ".\n";
  }

  PromptDoc doc;
  doc.text = os.str();
  doc.phase_id = is.phases[src.phase].id;
  doc.intersection_id = is.id;
  doc.hash = fnv1a64(doc.text);
  return doc;
}

}  // namespace lats::ts
