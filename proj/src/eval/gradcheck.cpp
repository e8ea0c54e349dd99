#include "lcgan/eval/gradcheck.hpp"

#include <cmath>

namespace lcgan::eval {

GradcheckResult gradcheck(const std::function<double(nn::Gradients<double>*)>& evaluate,
                          const std::vector<nn::NamedParam<double>>& probes, double epsilon, double abs_floor) {
  std::size_t total = 0;
  for (const auto& p : probes) total += p.value->size();
  if (total > kGradcheckMaxParams)
    throw InvalidArgument("gradcheck: " + std::to_string(total) + " parameters exceeds the limit of " +
                          std::to_string(kGradcheckMaxParams));
  if (!(epsilon > 0)) throw InvalidArgument("gradcheck: epsilon must be positive");

  nn::Gradients<double> grads;
  const double base = evaluate(&grads);
  if (!std::isfinite(base)) throw NumericError("gradcheck: non-finite loss at the probe point");

  GradcheckResult result;
  for (const auto& p : probes) {
    const Tensor<double>& analytic = grads.slot(*p.value);
    for (std::size_t i = 0; i < p.value->size(); ++i) {
      double& theta = (*p.value)[i];
      const double saved = theta;
      theta = saved + epsilon;
      const double up = evaluate(nullptr);
      theta = saved - epsilon;
      const double down = evaluate(nullptr);
      theta = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("gradcheck: non-finite loss in the probe region of '" + p.name + "'");
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[i];
      const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), abs_floor});
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_name = p.name;
        result.worst_index = i;
        result.analytic_at_worst = a;
        result.numeric_at_worst = numeric;
      }
    }
  }
  return result;
}

}  // namespace lcgan::eval
