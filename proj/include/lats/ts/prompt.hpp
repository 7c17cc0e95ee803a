#pragma once

#include <cstdint>
#include <string>

#include "lats/net/network.hpp"
#include "lats/obs/encoder.hpp"

namespace lats::ts {

struct PromptDoc {
  std::string text;
  std::string phase_id;
  std::string intersection_id;
  std::uint64_t hash = 0;  // FNV-1a of text; text encodes x_p and the step history
};

/// Topology block shared by every phase of an intersection, followed by a
/// dynamics block over the phase's activated movements for four steps.
/// Counts are de-normalized to integers. Deterministic.
PromptDoc render_prompt(const obs::PhasePromptSource& src, const net::NetworkSpec& net);

/// The topology block alone (exposed for tests).
std::string render_topology(const net::NetworkSpec& net, std::size_t intersection);

}  // namespace lats::ts
