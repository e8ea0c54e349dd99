#pragma once

// Scalar objectives and their gradients. Values are returned in double;
// gradients have the precision of the inputs.

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcgan/core/tensor.hpp"
#include "lcgan/models/networks.hpp"

namespace lcgan::losses {

using ClassSet = std::set<int>;

enum class Mode { cyclegan, label_cyclegan, simgan };
enum class AdversarialForm { least_squares, binary_cross_entropy };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);
std::string to_string(AdversarialForm f);
AdversarialForm adversarial_form_from_string(const std::string& s);

template <typename T>
struct LossAndGrad {
  double value = 0.0;
  Tensor<T> grad;  // gradient with respect to the second (or only) tensor argument
};

/// Numerically stable softmax of one logit row.
template <typename T>
std::vector<double> softmax(std::span<const T> logits);

/// -log softmax(logits)[label].
template <typename T>
double cross_entropy(std::span<const T> logits, int label);

/// Adds scale * d(cross_entropy)/d(logits) into grad.
template <typename T>
void cross_entropy_backward(std::span<const T> logits, int label, double scale, std::span<T> grad);

/// Least-squares: mean over patches of (score - t)^2, t = 1 for a real
/// target and 0 for a fake one. BCE: mean softplus form on raw scores.
template <typename T>
LossAndGrad<T> adversarial_loss(const Tensor<T>& scores, bool target_real,
                                AdversarialForm form = AdversarialForm::least_squares);

/// Mean absolute elementwise difference; gradient is with respect to
/// `reconstructed` (the gradient with respect to `original` is its negation).
template <typename T>
LossAndGrad<T> cycle_loss(const Tensor<T>& original, const Tensor<T>& reconstructed);

/// Same form as cycle_loss, between a simulated image and its refinement.
template <typename T>
LossAndGrad<T> self_regularization_loss(const Tensor<T>& simulated, const Tensor<T>& refined) {
  return cycle_loss(simulated, refined);
}

template <typename T>
struct LabelLossResult {
  double value = 0.0;
  double masked_fraction = 0.0;
  std::size_t used = 0;
  std::size_t total = 0;
  Tensor<T> grad_transformed;
  Tensor<T> grad_cycle;
};

/// Mean cross-entropy of a frozen classifier over the non-excluded items of
/// both streams (pooled). The classifier's parameters receive no gradient.
/// When every item is excluded the value is exactly 0, masked_fraction is 1
/// and the gradients are zero.
template <typename T>
LabelLossResult<T> label_loss(const models::Classifier<T>& classifier, const Tensor<T>& transformed,
                              std::span<const int> labels, const Tensor<T>& cycle_transformed,
                              std::span<const int> cycle_labels, const ClassSet& exclude, bool want_grad);

/// Combination coefficients; a weight the active mode needs must be set.
struct LossWeights {
  std::optional<double> lambda_cyc;
  std::optional<double> lambda_lab_r;
  std::optional<double> lambda_lab_s;
  std::optional<double> lambda_selfreg;

  static LossWeights defaults() { return {10.0, 1.0, 1.0, 1.0}; }
  /// Throws InvalidArgument on negative or non-finite weights.
  void validate() const;
};

/// Per-step component values. Serialized with exactly these keys.
struct LossReport {
  double adv_r = 0.0;
  double adv_s = 0.0;
  double cycle = 0.0;
  double lab_r = 0.0;
  double lab_s = 0.0;
  double selfreg = 0.0;
  double total = 0.0;
  double masked_fraction = 0.0;

  bool operator==(const LossReport&) const = default;
};

nlohmann::json to_json(const LossReport& r);
/// Same keys, with components the mode does not use written as null.
nlohmann::json to_json(const LossReport& r, Mode mode);
/// Null components read back as 0.
LossReport loss_report_from_json(const nlohmann::json& j);

/// cyclegan:       adv_r + adv_s + lambda_cyc * cycle
/// label_cyclegan: cyclegan total + lambda_lab_r * lab_r + lambda_lab_s * lab_s
/// simgan:         adv_r + lambda_selfreg * selfreg
double total_objective(const LossReport& components, const LossWeights& weights, Mode mode);

/// Resolved coefficient of each component under a mode (0 when unused).
struct ComponentWeights {
  double adv_r = 0, adv_s = 0, cycle = 0, lab_r = 0, lab_s = 0, selfreg = 0;
};
ComponentWeights component_weights(const LossWeights& weights, Mode mode);

}  // namespace lcgan::losses
