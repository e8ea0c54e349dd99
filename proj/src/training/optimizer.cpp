#include "lcgan/training/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "lcgan/simd/kernels.hpp"

namespace lcgan::training {

std::string to_string(LrDecay d) { return d == LrDecay::none ? "none" : "linear_after_half"; }

LrDecay lr_decay_from_string(const std::string& s) {
  if (s == "none") return LrDecay::none;
  if (s == "linear_after_half") return LrDecay::linear_after_half;
  throw InvalidArgument("unknown lr_decay '" + s + "' (expected none or linear_after_half)");
}

double scheduled_lr(double base, LrDecay decay, int epoch, int total_epochs) {
  if (total_epochs < 1 || epoch < 1 || epoch > total_epochs)
    throw InvalidArgument("epoch " + std::to_string(epoch) + " outside [1, " + std::to_string(total_epochs) + "]");
  if (decay == LrDecay::none) return base;
  const int half = total_epochs / 2;
  const double past = std::max(0, epoch - half);
  return base * (1.0 - past / static_cast<double>(total_epochs - half + 1));
}

// ------------------------------------------------------------------ Adam

template <typename T>
Adam<T>::Adam(std::vector<nn::NamedParam<T>> params, AdamSettings settings)
    : params_(std::move(params)), settings_(settings) {
  if (!(settings.beta1 >= 0 && settings.beta1 < 1 && settings.beta2 >= 0 && settings.beta2 < 1 && settings.eps > 0))
    throw InvalidArgument("Adam needs beta1, beta2 in [0, 1) and eps > 0");
  for (const auto& p : params_) {
    m_.emplace_back(p.value->size(), T(0));
    v_.emplace_back(p.value->size(), T(0));
  }
}

template <typename T>
void Adam<T>::step(const nn::Gradients<T>& grads, double lr) {
  for (const auto& p : params_) {
    const Tensor<T>* g = grads.find(*p.value);
    if (!g) continue;
    for (T x : g->values())
      if (!std::isfinite(x)) throw NumericError("non-finite gradient in parameter " + p.name);
  }
  ++t_;
  simd::AdamCoeffs c;
  c.lr = lr;
  c.beta1 = settings_.beta1;
  c.beta2 = settings_.beta2;
  c.eps = settings_.eps;
  c.bias1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t_));
  c.bias2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Tensor<T>* g = grads.find(*params_[i].value);
    if (!g) continue;
    simd::adam_update(params_[i].value->data(), g->data(), m_[i].data(), v_[i].data(), m_[i].size(), c);
  }
}

template <typename T>
void Adam<T>::store(TensorArchive& ar, const std::string& prefix) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto n = static_cast<std::int64_t>(m_[i].size());
    ar.put(prefix + "/m/" + params_[i].name, {n}, std::vector<float>(m_[i].begin(), m_[i].end()));
    ar.put(prefix + "/v/" + params_[i].name, {n}, std::vector<float>(v_[i].begin(), v_[i].end()));
  }
  ar.metadata["adam"][prefix] = {{"t", t_}};
}

template <typename T>
void Adam<T>::load(const TensorArchive& ar, const std::string& prefix) {
  if (!ar.metadata.contains("adam") || !ar.metadata["adam"].contains(prefix))
    throw FormatError("archive has no optimizer state '" + prefix + "'");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& m = ar.get(prefix + "/m/" + params_[i].name);
    const auto& v = ar.get(prefix + "/v/" + params_[i].name);
    if (m.f32.size() != m_[i].size() || v.f32.size() != v_[i].size())
      throw ShapeError("optimizer state size mismatch for " + params_[i].name);
    std::copy(m.f32.begin(), m.f32.end(), m_[i].begin());
    std::copy(v.f32.begin(), v.f32.end(), v_[i].begin());
  }
  t_ = ar.metadata["adam"][prefix].at("t").get<std::int64_t>();
}

template class Adam<float>;
template class Adam<double>;

// ------------------------------------------------------------- ImagePool

Tensor<float> ImagePool::query(const Tensor<float>& batch) {
  if (capacity_ == 0) return batch;
  const Shape s = batch.shape();
  if (!stored_.empty() && !(s.with_batch(1) == item_shape_))
    throw ShapeError("image pool holds " + item_shape_.str() + " items, got batch " + s.str());
  item_shape_ = s.with_batch(1);
  const std::size_t item = s.item_size();
  Tensor<float> out(s);
  for (int i = 0; i < s.n; ++i) {
    const float* src = batch.item(i);
    float* dst = out.item(i);
    if (stored_.size() < capacity_) {
      stored_.emplace_back(src, src + item);
      std::memcpy(dst, src, item * sizeof(float));
    } else if (rng_.uniform() < 0.5) {
      auto& slot = stored_[rng_.below(stored_.size())];
      std::memcpy(dst, slot.data(), item * sizeof(float));
      std::copy(src, src + item, slot.begin());
    } else {
      std::memcpy(dst, src, item * sizeof(float));
    }
  }
  return out;
}

void ImagePool::store(TensorArchive& ar, const std::string& name) const {
  std::vector<float> flat;
  for (const auto& s : stored_) flat.insert(flat.end(), s.begin(), s.end());
  ar.put(name, {static_cast<std::int64_t>(stored_.size()), item_shape_.h, item_shape_.w, item_shape_.c},
         std::move(flat));
  ar.metadata["pools"][name] = {{"rng", rng_.save_state()}, {"capacity", capacity_}};
}

void ImagePool::load(const TensorArchive& ar, const std::string& name) {
  const auto& e = ar.get(name);
  if (e.shape.size() != 4) throw FormatError("pool entry '" + name + "' is not 4-dimensional");
  const auto& meta = ar.metadata.at("pools").at(name);
  if (meta.at("capacity").get<std::size_t>() != capacity_)
    throw ConfigError("pool_size", "checkpoint pool capacity differs from the configured one");
  item_shape_ = Shape{1, static_cast<int>(e.shape[1]), static_cast<int>(e.shape[2]), static_cast<int>(e.shape[3])};
  const std::size_t item = item_shape_.item_size();
  stored_.clear();
  for (std::int64_t i = 0; i < e.shape[0]; ++i)
    stored_.emplace_back(e.f32.begin() + static_cast<std::ptrdiff_t>(i * item),
                         e.f32.begin() + static_cast<std::ptrdiff_t>((i + 1) * item));
  rng_.load_state(meta.at("rng").get<std::string>());
}

}  // namespace lcgan::training
