#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "skeltk/nn/tensor.hpp"

namespace skeltk::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients of the scalar f() against central
// differences (f(p+eps) - f(p-eps)) / (2 eps) for every element of every
// listed parameter. Relative error uses denominator max(|analytic|,
// |numeric|, 1e-8). Elements where both sides are <= atol in magnitude are
// skipped; that absorbs finite-difference noise on directions with a true
// zero gradient. f must rebuild its graph on each call and be deterministic
// (freeze dropout masks).
GradCheckReport check_gradients(
    const std::function<Tensor()>& f,
    const std::vector<std::pair<std::string, Tensor>>& params,
    double eps = 1e-5, double atol = 0.0);

}  // namespace skeltk::nn
