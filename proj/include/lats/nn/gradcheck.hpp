#pragma once

#include <functional>
#include <vector>

#include "lats/nn/autodiff.hpp"

namespace lats::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Central finite differences against reverse mode for every entry of
/// `params`. f builds a scalar loss on the graph it is given. Relative error
/// per entry is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const std::function<Var(Graph&)>& f, const std::vector<Tensor*>& params,
                           double eps = 1e-5, double floor = 1e-6);

}  // namespace lats::nn
