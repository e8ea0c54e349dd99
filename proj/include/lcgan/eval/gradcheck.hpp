#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "lcgan/nn/param.hpp"

namespace lcgan::eval {

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;
};

/// Largest parameter count the harness will finite-difference.
inline constexpr std::size_t kGradcheckMaxParams = 10000;

/// Compares analytic gradients against central differences
/// (f(theta + eps) - f(theta - eps)) / (2 eps), element by element.
///
/// `evaluate(grads)` returns the scalar loss at the current values; when
/// `grads` is non-null it must also accumulate the analytic gradient of every
/// probed tensor into grads->slot(tensor). Relative error per element is
/// |a - n| / max(|a|, |n|, abs_floor).
GradcheckResult gradcheck(const std::function<double(nn::Gradients<double>*)>& evaluate,
                          const std::vector<nn::NamedParam<double>>& probes, double epsilon,
                          double abs_floor = 1e-6);

}  // namespace lcgan::eval
