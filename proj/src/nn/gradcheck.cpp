#include "skeltk/nn/gradcheck.hpp"

#include <cmath>

#include "skeltk/error.hpp"

namespace skeltk::nn {

GradCheckReport check_gradients(
    const std::function<Tensor()>& f,
    const std::vector<std::pair<std::string, Tensor>>& params, double eps,
    double atol) {
  for (const auto& [name, p] : params) {
    if (!p.defined() || !p.requires_grad())
      throw ValidationError("check_gradients: parameter \"" + name +
                            "\" does not require grad");
    p.node()->grad.clear();
  }

  Tensor loss = f();
  if (loss.numel() != 1)
    throw DimensionError("check_gradients: f() must return a scalar");
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    if (p.has_grad())
      analytic.push_back(p.grad());
    else
      analytic.emplace_back(p.numel(), 0.0);  // unreachable parameter
  }

  GradCheckReport report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi].second;
    std::vector<double>& v = p.values();
    for (std::int64_t i = 0; i < p.numel(); ++i) {
      const double saved = v[i];
      double plus, minus;
      {
        NoGradGuard guard;
        v[i] = saved + eps;
        plus = f().scalar();
        v[i] = saved - eps;
        minus = f().scalar();
      }
      v[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[pi][i];
      // both sides negligible: a structurally dead direction (e.g. a bias
      // immediately absorbed by normalization) where the central difference
      // is pure rounding noise
      if (std::fabs(a) <= atol && std::fabs(numeric) <= atol) continue;
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params[pi].first;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace skeltk::nn
