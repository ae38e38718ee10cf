#pragma once

#include <functional>

#include "gsnlab/optim.hpp"

namespace gsn {

// Central finite differences over every element of every parameter tensor,
// compared against the supplied analytic gradients. The loss closure must
// be deterministic (freeze noise with a fixed RandomSource per call).
double gradcheck_max_rel_err(const std::function<double()>& loss_fn, ParamSet& params,
                             const GradSet& analytic, double h = 1e-5);

}  // namespace gsn
