#pragma once

// Central-difference validation of the tape's analytic gradients.

#include <functional>
#include <vector>

#include "pnv/graph.hpp"
#include "pnv/tensor.hpp"

namespace pnv {

// Builds a scalar loss from parameter leaves already added to the graph,
// in the same order as the params list. Returns the loss node id.
using LossBuilder = std::function<int(Graph&, const std::vector<int>&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  int64_t entries = 0;  // parameter entries compared
  int64_t kinked = 0;   // entries skipped because a hinge boundary sits within h
};

GradCheckResult grad_check_full(const LossBuilder& build, const std::vector<Tensor>& params,
                                double h);

// Max relative error |analytic - central| / max(1, |central|) over all
// parameter entries; entries whose second difference reveals a kink inside
// the step are excluded.
double grad_check(const LossBuilder& build, const std::vector<Tensor>& params, double h);

}  // namespace pnv
