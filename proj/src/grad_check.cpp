#include "pnv/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace pnv {

namespace {

double eval_loss(const LossBuilder& build, const std::vector<Tensor>& params) {
  Graph g;
  std::vector<int> ids;
  ids.reserve(params.size());
  for (const Tensor& p : params) ids.push_back(g.leaf(p));
  const int loss = build(g, ids);
  const Tensor& v = g.value(loss);
  if (v.size() != 1)
    throw std::invalid_argument("grad_check: loss must be scalar, got shape " + v.shape_str());
  return v[0];
}

}  // namespace

GradCheckResult grad_check_full(const LossBuilder& build, const std::vector<Tensor>& params,
                                double h) {
  if (h <= 0.0) throw std::invalid_argument("grad_check: step must be positive");

  std::vector<Tensor> grads;
  {
    Graph g;
    std::vector<int> ids;
    for (const Tensor& p : params) ids.push_back(g.leaf(p, /*trainable=*/true));
    const int loss = build(g, ids);
    if (g.value(loss).size() != 1)
      throw std::invalid_argument("grad_check: loss must be scalar, got shape " +
                                  g.value(loss).shape_str());
    g.backward(loss);
    for (int id : ids) grads.push_back(g.grad_of(id));
  }

  const double f0 = eval_loss(build, params);
  // Second difference of a smooth loss is O(h^2); a ReLU or max crossing
  // its boundary inside the step shows up as O(h). The threshold splits them.
  const double kink_threshold = 1e-8;

  GradCheckResult result;
  std::vector<Tensor> work = params;
  for (size_t p = 0; p < params.size(); ++p) {
    for (int64_t i = 0; i < params[p].size(); ++i) {
      const double saved = work[p][i];
      work[p][i] = saved + h;
      const double fp = eval_loss(build, work);
      work[p][i] = saved - h;
      const double fm = eval_loss(build, work);
      work[p][i] = saved;
      ++result.entries;
      if (std::fabs(fp - 2.0 * f0 + fm) > kink_threshold) {
        ++result.kinked;
        continue;
      }
      const double central = (fp - fm) / (2.0 * h);
      const double rel =
          std::fabs(grads[p][i] - central) / std::max(1.0, std::fabs(central));
      result.max_rel_err = std::max(result.max_rel_err, rel);
    }
  }
  return result;
}

double grad_check(const LossBuilder& build, const std::vector<Tensor>& params, double h) {
  return grad_check_full(build, params, h).max_rel_err;
}

}  // namespace pnv
