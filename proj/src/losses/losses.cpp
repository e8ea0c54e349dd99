#include "lcgan/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "lcgan/simd/kernels.hpp"

namespace lcgan::losses {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::cyclegan:
      return "cyclegan";
    case Mode::label_cyclegan:
      return "label_cyclegan";
    case Mode::simgan:
      return "simgan";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  if (s == "cyclegan") return Mode::cyclegan;
  if (s == "label_cyclegan") return Mode::label_cyclegan;
  if (s == "simgan") return Mode::simgan;
  throw InvalidArgument("unknown mode '" + s + "' (expected simgan, cyclegan or label_cyclegan)");
}

std::string to_string(AdversarialForm f) {
  return f == AdversarialForm::least_squares ? "least_squares" : "binary_cross_entropy";
}

AdversarialForm adversarial_form_from_string(const std::string& s) {
  if (s == "least_squares") return AdversarialForm::least_squares;
  if (s == "binary_cross_entropy") return AdversarialForm::binary_cross_entropy;
  throw InvalidArgument("unknown adversarial form '" + s + "'");
}

template <typename T>
std::vector<double> softmax(std::span<const T> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = static_cast<double>(*std::max_element(logits.begin(), logits.end()));
  double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - mx);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

template <typename T>
double cross_entropy(std::span<const T> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw InvalidArgument("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                          std::to_string(logits.size()) + ")");
  const double mx = static_cast<double>(*std::max_element(logits.begin(), logits.end()));
  double z = 0;
  for (T v : logits) z += std::exp(static_cast<double>(v) - mx);
  return std::max(0.0, mx + std::log(z) - static_cast<double>(logits[static_cast<std::size_t>(label)]));
}

template <typename T>
void cross_entropy_backward(std::span<const T> logits, int label, double scale, std::span<T> grad) {
  const auto p = softmax(logits);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - (static_cast<int>(i) == label ? 1.0 : 0.0);
    grad[i] += static_cast<T>(scale * d);
  }
}

template <typename T>
LossAndGrad<T> adversarial_loss(const Tensor<T>& scores, bool target_real, AdversarialForm form) {
  if (scores.empty()) throw InvalidArgument("adversarial_loss: empty score map");
  const double n = static_cast<double>(scores.size());
  LossAndGrad<T> out{0.0, Tensor<T>(scores.shape())};
  double sum = 0;
  if (form == AdversarialForm::least_squares) {
    const double t = target_real ? 1.0 : 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double d = static_cast<double>(scores[i]) - t;
      sum += d * d;
      out.grad[i] = static_cast<T>(2.0 * d / n);
    }
  } else {
    // target real: softplus(-s); target fake: softplus(s)
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double s = target_real ? -static_cast<double>(scores[i]) : static_cast<double>(scores[i]);
      sum += s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
      const double sig = 1.0 / (1.0 + std::exp(-static_cast<double>(scores[i])));
      out.grad[i] = static_cast<T>((sig - (target_real ? 1.0 : 0.0)) / n);
    }
  }
  out.value = sum / n;
  return out;
}

template <typename T>
LossAndGrad<T> cycle_loss(const Tensor<T>& original, const Tensor<T>& reconstructed) {
  require_same_shape(original.shape(), reconstructed.shape(), "cycle_loss");
  if (original.empty()) throw InvalidArgument("cycle_loss: empty tensors");
  const double n = static_cast<double>(original.size());
  LossAndGrad<T> out{simd::abs_diff_sum(reconstructed.data(), original.data(), original.size()) / n,
                     Tensor<T>(original.shape())};
  const T g = static_cast<T>(1.0 / n);
  for (std::size_t i = 0; i < original.size(); ++i) {
    const T d = reconstructed[i] - original[i];
    out.grad[i] = d > T(0) ? g : (d < T(0) ? -g : T(0));
  }
  return out;
}

template <typename T>
LabelLossResult<T> label_loss(const models::Classifier<T>& classifier, const Tensor<T>& transformed,
                              std::span<const int> labels, const Tensor<T>& cycle_transformed,
                              std::span<const int> cycle_labels, const ClassSet& exclude, bool want_grad) {
  const auto n1 = static_cast<std::size_t>(transformed.shape().n);
  const auto n2 = static_cast<std::size_t>(cycle_transformed.shape().n);
  if (transformed.empty()) throw InvalidArgument("label_loss: empty transformed batch");
  if (labels.size() != n1 || cycle_labels.size() != n2)
    throw InvalidArgument("label_loss: batch/label length mismatch");
  if (n2 > 0 && transformed.shape().item_size() != cycle_transformed.shape().item_size())
    throw ShapeError("label_loss: streams have different image shapes");

  LabelLossResult<T> out;
  out.total = n1 + n2;
  out.grad_transformed = Tensor<T>(transformed.shape());
  out.grad_cycle = Tensor<T>(cycle_transformed.shape());

  std::vector<int> all_labels(labels.begin(), labels.end());
  all_labels.insert(all_labels.end(), cycle_labels.begin(), cycle_labels.end());
  std::vector<bool> keep(all_labels.size());
  for (std::size_t i = 0; i < all_labels.size(); ++i) {
    keep[i] = !exclude.contains(all_labels[i]);
    if (keep[i]) ++out.used;
  }
  out.masked_fraction = 1.0 - static_cast<double>(out.used) / static_cast<double>(out.total);
  if (out.used == 0) return out;

  // Both streams go through the classifier as one batch.
  const Shape s = transformed.shape();
  Tensor<T> joint(Shape{static_cast<int>(n1 + n2), s.h, s.w, s.c});
  std::memcpy(joint.data(), transformed.data(), transformed.size() * sizeof(T));
  if (n2 > 0) std::memcpy(joint.data() + transformed.size(), cycle_transformed.data(), cycle_transformed.size() * sizeof(T));

  nn::Tape<T> tape;
  const Tensor<T> logits = classifier.forward(joint, want_grad ? &tape : nullptr);
  const auto k = static_cast<std::size_t>(logits.shape().item_size());
  Tensor<T> glogits(logits.shape());
  const double inv_used = 1.0 / static_cast<double>(out.used);
  double sum = 0;
  for (std::size_t i = 0; i < all_labels.size(); ++i) {
    if (!keep[i]) continue;
    std::span<const T> row(logits.data() + i * k, k);
    sum += cross_entropy(row, all_labels[i]);
    if (want_grad) cross_entropy_backward(row, all_labels[i], inv_used, std::span<T>(glogits.data() + i * k, k));
  }
  out.value = sum * inv_used;
  if (want_grad) {
    const Tensor<T> gjoint = classifier.backward(glogits, tape, nullptr);
    std::memcpy(out.grad_transformed.data(), gjoint.data(), transformed.size() * sizeof(T));
    if (n2 > 0)
      std::memcpy(out.grad_cycle.data(), gjoint.data() + transformed.size(), cycle_transformed.size() * sizeof(T));
  }
  return out;
}

void LossWeights::validate() const {
  auto check = [](const std::optional<double>& w, const char* name) {
    if (w && (!std::isfinite(*w) || *w < 0.0))
      throw InvalidArgument(std::string("loss weight ") + name + " must be finite and non-negative");
  };
  check(lambda_cyc, "lambda_cyc");
  check(lambda_lab_r, "lambda_lab_r");
  check(lambda_lab_s, "lambda_lab_s");
  check(lambda_selfreg, "lambda_selfreg");
}

nlohmann::json to_json(const LossReport& r) {
  return {{"adv_r", r.adv_r}, {"adv_s", r.adv_s}, {"cycle", r.cycle}, {"lab_r", r.lab_r},
          {"lab_s", r.lab_s}, {"selfreg", r.selfreg}, {"total", r.total}, {"masked_fraction", r.masked_fraction}};
}

nlohmann::json to_json(const LossReport& r, Mode mode) {
  nlohmann::json j = to_json(r);
  const bool cyc = mode != Mode::simgan;
  if (!cyc) j["adv_s"] = j["cycle"] = nullptr;
  if (mode != Mode::label_cyclegan) j["lab_r"] = j["lab_s"] = j["masked_fraction"] = nullptr;
  if (mode != Mode::simgan) j["selfreg"] = nullptr;
  return j;
}

LossReport loss_report_from_json(const nlohmann::json& j) {
  auto get = [&](const char* k) {
    const auto& v = j.at(k);
    return v.is_null() ? 0.0 : v.get<double>();
  };
  LossReport r;
  r.adv_r = get("adv_r");
  r.adv_s = get("adv_s");
  r.cycle = get("cycle");
  r.lab_r = get("lab_r");
  r.lab_s = get("lab_s");
  r.selfreg = get("selfreg");
  r.total = get("total");
  r.masked_fraction = get("masked_fraction");
  return r;
}

namespace {
double require(const std::optional<double>& w, const char* name, Mode mode) {
  if (!w) throw InvalidArgument(std::string("weight ") + name + " is required by mode " + to_string(mode));
  return *w;
}
}  // namespace

ComponentWeights component_weights(const LossWeights& weights, Mode mode) {
  weights.validate();
  ComponentWeights c;
  switch (mode) {
    case Mode::simgan:
      c.adv_r = 1.0;
      c.selfreg = require(weights.lambda_selfreg, "lambda_selfreg", mode);
      break;
    case Mode::label_cyclegan:
      c.lab_r = require(weights.lambda_lab_r, "lambda_lab_r", mode);
      c.lab_s = require(weights.lambda_lab_s, "lambda_lab_s", mode);
      [[fallthrough]];
    case Mode::cyclegan:
      c.adv_r = 1.0;
      c.adv_s = 1.0;
      c.cycle = require(weights.lambda_cyc, "lambda_cyc", mode);
      break;
  }
  return c;
}

double total_objective(const LossReport& r, const LossWeights& weights, Mode mode) {
  for (double v : {r.adv_r, r.adv_s, r.cycle, r.lab_r, r.lab_s, r.selfreg})
    if (!std::isfinite(v)) throw NumericError("total_objective: non-finite component");
  const ComponentWeights c = component_weights(weights, mode);
  switch (mode) {
    case Mode::simgan:
      return r.adv_r + c.selfreg * r.selfreg;
    case Mode::cyclegan:
      return r.adv_r + r.adv_s + c.cycle * r.cycle;
    case Mode::label_cyclegan:
      return r.adv_r + r.adv_s + c.cycle * r.cycle + c.lab_r * r.lab_r + c.lab_s * r.lab_s;
  }
  return 0.0;
}

#define LCGAN_INSTANTIATE(T)                                                                                    \
  template std::vector<double> softmax(std::span<const T>);                                                     \
  template double cross_entropy(std::span<const T>, int);                                                       \
  template void cross_entropy_backward(std::span<const T>, int, double, std::span<T>);                          \
  template LossAndGrad<T> adversarial_loss(const Tensor<T>&, bool, AdversarialForm);                            \
  template LossAndGrad<T> cycle_loss(const Tensor<T>&, const Tensor<T>&);                                       \
  template LabelLossResult<T> label_loss(const models::Classifier<T>&, const Tensor<T>&, std::span<const int>, \
                                         const Tensor<T>&, std::span<const int>, const ClassSet&, bool);

LCGAN_INSTANTIATE(float)
LCGAN_INSTANTIATE(double)

#undef LCGAN_INSTANTIATE

}  // namespace lcgan::losses
