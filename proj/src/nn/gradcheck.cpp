#include "lats/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace lats::nn {

GradCheckResult grad_check(const std::function<Var(Graph&)>& f, const std::vector<Tensor*>& params,
                           double eps, double floor) {
  for (Tensor* t : params) t->grad = Mat::Zero(t->value.rows(), t->value.cols());
  {
    Graph g;
    Var loss = f(g);
    g.backward(loss);
  }
  GradCheckResult res;
  auto eval = [&] {
    Graph g(false);
    return f(g).scalar();
  };
  for (Tensor* t : params) {
    for (Eigen::Index i = 0; i < t->value.size(); ++i) {
      double& x = t->value.data()[i];
      const double orig = x;
      x = orig + eps;
      const double fp = eval();
      x = orig - eps;
      const double fm = eval();
      x = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = t->grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic - numeric) / denom);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace lats::nn
