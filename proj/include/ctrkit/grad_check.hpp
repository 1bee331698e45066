#pragma once

#include <functional>

#include "ctrkit/graph.hpp"

namespace ctrkit {

// Compares reverse-mode gradients against central finite differences
// (f(x+eps) - f(x-eps)) / (2 eps). `build` must return a scalar node.
// Returns the max of |analytic - numeric| / max(|analytic|, |numeric|, 1).
double grad_check(const std::function<Var(Graph&, Var)>& build, const Array& x, double eps);

// Same check over every entry of every array in a ParamStore. `build` reads
// parameters through the graph it is given and returns a scalar node.
double grad_check_params(ParamStore& params, const std::function<Var(Graph&)>& build, double eps);

}  // namespace ctrkit
