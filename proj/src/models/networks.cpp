#include "lcgan/models/networks.hpp"

#include <cmath>

#include "lcgan/models/label_map.hpp"

namespace lcgan::models {

using nn::Conv2d;
using nn::ConvSpec;
using nn::InstanceNorm;
using nn::LeakyRelu;
using nn::Sequential;

std::string to_string(Direction d) { return d == Direction::s2r ? "s2r" : "r2s"; }
std::string to_string(DomainSide d) { return d == DomainSide::real_side ? "real_side" : "sim_side"; }

namespace {

nlohmann::json image_json(const ImageShape& s) { return nlohmann::json::array({s.h, s.w, s.c}); }

ImageShape image_from_json(const nlohmann::json& j) {
  return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()};
}

DomainSide side_from_string(const std::string& s) {
  if (s == "real_side") return DomainSide::real_side;
  if (s == "sim_side") return DomainSide::sim_side;
  throw FormatError("unknown domain side '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const GeneratorArch& a) {
  return {{"kind", "generator"},
          {"image_shape", image_json(a.image)},
          {"base_channels", a.base_channels},
          {"downsample_stages", a.downsample_stages},
          {"residual_blocks", a.residual_blocks},
          {"label_channels", a.label_channels},
          {"init_std", a.init_std},
          {"direction", to_string(a.direction)},
          {"passthrough", a.passthrough}};
}

nlohmann::json to_json(const DiscriminatorArch& a) {
  return {{"kind", "discriminator"}, {"image_shape", image_json(a.image)}, {"base_channels", a.base_channels},
          {"stages", a.stages},       {"init_std", a.init_std},             {"slope", a.slope},
          {"side", to_string(a.side)}};
}

nlohmann::json to_json(const ClassifierArch& a) {
  return {{"kind", "classifier"},
          {"image_shape", image_json(a.image)},
          {"classes", a.classes},
          {"conv1_channels", a.conv1_channels},
          {"conv2_channels", a.conv2_channels},
          {"init_std", a.init_std},
          {"side", to_string(a.side)}};
}

GeneratorArch generator_arch_from_json(const nlohmann::json& j) {
  GeneratorArch a;
  a.image = image_from_json(j.at("image_shape"));
  a.base_channels = j.at("base_channels").get<int>();
  a.downsample_stages = j.at("downsample_stages").get<int>();
  a.residual_blocks = j.at("residual_blocks").get<int>();
  a.label_channels = j.at("label_channels").get<int>();
  a.init_std = j.at("init_std").get<double>();
  a.direction = j.at("direction").get<std::string>() == "r2s" ? Direction::r2s : Direction::s2r;
  a.passthrough = j.value("passthrough", false);
  return a;
}

DiscriminatorArch discriminator_arch_from_json(const nlohmann::json& j) {
  DiscriminatorArch a;
  a.image = image_from_json(j.at("image_shape"));
  a.base_channels = j.at("base_channels").get<int>();
  a.stages = j.at("stages").get<int>();
  a.init_std = j.at("init_std").get<double>();
  a.slope = j.at("slope").get<double>();
  a.side = side_from_string(j.at("side").get<std::string>());
  return a;
}

ClassifierArch classifier_arch_from_json(const nlohmann::json& j) {
  ClassifierArch a;
  a.image = image_from_json(j.at("image_shape"));
  a.classes = j.at("classes").get<int>();
  a.conv1_channels = j.at("conv1_channels").get<int>();
  a.conv2_channels = j.at("conv2_channels").get<int>();
  a.init_std = j.at("init_std").get<double>();
  a.side = side_from_string(j.at("side").get<std::string>());
  return a;
}

// -------------------------------------------------------------- Generator

template <typename T>
Generator<T>::Generator(const GeneratorArch& arch, Rng& rng) : arch_(arch) {
  if (arch.passthrough) {
    if (arch.label_channels != 0) throw InvalidArgument("passthrough generator cannot take label channels");
    return;
  }
  if (arch.base_channels <= 0 || arch.downsample_stages < 0 || arch.residual_blocks < 0 || arch.label_channels < 0)
    throw InvalidArgument("GeneratorArch: invalid dimensions");
  const double s = arch.init_std;
  int ch = arch.base_channels;
  encoder_.template add<Conv2d<T>>(ConvSpec{arch.image.c, ch, 3, 1, 1}, rng, s);
  encoder_.template add<InstanceNorm<T>>();
  encoder_.template add<LeakyRelu<T>>(0.0);
  for (int i = 0; i < arch.downsample_stages; ++i) {
    encoder_.template add<Conv2d<T>>(ConvSpec{ch, 2 * ch, 3, 2, 1}, rng, s);
    encoder_.template add<InstanceNorm<T>>();
    encoder_.template add<LeakyRelu<T>>(0.0);
    ch *= 2;
  }
  for (int i = 0; i < arch.residual_blocks; ++i) {
    Sequential<T> body;
    body.template add<Conv2d<T>>(ConvSpec{ch, ch, 3, 1, 1}, rng, s);
    body.template add<InstanceNorm<T>>();
    body.template add<LeakyRelu<T>>(0.0);
    body.template add<Conv2d<T>>(ConvSpec{ch, ch, 3, 1, 1}, rng, s);
    body.template add<InstanceNorm<T>>();
    encoder_.template add<nn::Residual<T>>(std::move(body));
  }

  decoder_.template add<Conv2d<T>>(ConvSpec{ch + arch.label_channels, ch, 3, 1, 1}, rng, s);
  decoder_.template add<LeakyRelu<T>>(0.0);
  for (int i = 0; i < arch.downsample_stages; ++i) {
    decoder_.template add<nn::Upsample2x<T>>();
    decoder_.template add<Conv2d<T>>(ConvSpec{ch, ch / 2, 3, 1, 1}, rng, s);
    decoder_.template add<InstanceNorm<T>>();
    decoder_.template add<LeakyRelu<T>>(0.0);
    ch /= 2;
  }
  decoder_.template add<Conv2d<T>>(ConvSpec{ch, arch.image.c, 3, 1, 1}, rng, s);
  decoder_.template add<nn::Tanh<T>>();
}

template <typename T>
Tensor<T> Generator<T>::forward(const Tensor<T>& x, std::span<const int> labels, nn::Tape<T>* tape) const {
  const Shape& s = x.shape();
  if (s.c != arch_.image.c)
    throw ShapeError("generator: expected " + std::to_string(arch_.image.c) + " channels, got " + s.str());
  const int f = arch_.downsample_factor();
  if (s.h % f != 0 || s.w % f != 0)
    throw ShapeError("generator: spatial size " + s.str() + " not divisible by downsampling factor " +
                     std::to_string(f));
  if (conditional() && labels.size() != static_cast<std::size_t>(s.n))
    throw InvalidArgument("generator: conditional generator needs one label per item (got " +
                          std::to_string(labels.size()) + " for batch of " + std::to_string(s.n) + ")");
  if (arch_.passthrough) return x;
  Tensor<T> h = encoder_.forward(x, tape);
  if (conditional()) h = embed_label_map(h, labels, arch_.label_channels);
  return decoder_.forward(h, tape);
}

template <typename T>
Tensor<T> Generator<T>::backward(const Tensor<T>& gy, nn::Tape<T>& tape, nn::Gradients<T>* grads) const {
  if (arch_.passthrough) return gy;
  Tensor<T> g = decoder_.backward(gy, tape, grads);
  if (conditional()) g = strip_label_channels(g, arch_.label_channels);
  return encoder_.backward(g, tape, grads);
}

template <typename T>
std::vector<nn::NamedParam<T>> Generator<T>::params() {
  std::vector<nn::NamedParam<T>> out;
  encoder_.collect("enc.", out);
  decoder_.collect("dec.", out);
  return out;
}

// ---------------------------------------------------------- Discriminator

template <typename T>
Discriminator<T>::Discriminator(const DiscriminatorArch& arch, Rng& rng) : arch_(arch) {
  if (arch.stages < 1 || arch.base_channels <= 0) throw InvalidArgument("DiscriminatorArch: invalid dimensions");
  int in = arch.image.c;
  int ch = arch.base_channels;
  for (int i = 0; i < arch.stages; ++i) {
    body_.template add<Conv2d<T>>(ConvSpec{in, ch, 4, 2, 1}, rng, arch.init_std);
    if (i > 0) body_.template add<InstanceNorm<T>>();
    body_.template add<LeakyRelu<T>>(arch.slope);
    in = ch;
    ch *= 2;
  }
  body_.template add<Conv2d<T>>(ConvSpec{in, 1, 3, 1, 1}, rng, arch.init_std);
}

template <typename T>
Tensor<T> Discriminator<T>::forward(const Tensor<T>& x, nn::Tape<T>* tape) const {
  const Shape& s = x.shape();
  if (s.h != arch_.image.h || s.w != arch_.image.w || s.c != arch_.image.c)
    throw ShapeError("discriminator: input " + s.str() + " does not match configured image shape");
  return body_.forward(x, tape);
}

template <typename T>
Tensor<T> Discriminator<T>::backward(const Tensor<T>& gy, nn::Tape<T>& tape, nn::Gradients<T>* grads) const {
  return body_.backward(gy, tape, grads);
}

template <typename T>
std::vector<nn::NamedParam<T>> Discriminator<T>::params() {
  std::vector<nn::NamedParam<T>> out;
  body_.collect("", out);
  return out;
}

// ------------------------------------------------------------- Classifier

template <typename T>
Classifier<T>::Classifier(const ClassifierArch& arch, Rng& rng) : arch_(arch) {
  if (arch.classes < 2) throw InvalidArgument("ClassifierArch: need at least 2 classes");
  if (arch.image.h % 4 != 0 || arch.image.w % 4 != 0)
    throw InvalidArgument("ClassifierArch: image sides must be divisible by 4");
  body_.template add<Conv2d<T>>(ConvSpec{arch.image.c, arch.conv1_channels, 3, 1, 1}, rng, arch.init_std);
  body_.template add<LeakyRelu<T>>(0.0);
  body_.template add<nn::MaxPool2<T>>();
  body_.template add<Conv2d<T>>(ConvSpec{arch.conv1_channels, arch.conv2_channels, 3, 1, 1}, rng, arch.init_std);
  body_.template add<LeakyRelu<T>>(0.0);
  body_.template add<nn::MaxPool2<T>>();
  const int features = (arch.image.h / 4) * (arch.image.w / 4) * arch.conv2_channels;
  body_.template add<nn::Dense<T>>(features, arch.classes, rng, arch.init_std);
}

template <typename T>
void Classifier<T>::check_finite() const {
  std::vector<nn::NamedParam<T>> ps;
  const_cast<Sequential<T>&>(body_).collect("", ps);
  for (const auto& p : ps)
    for (T v : p.value->values())
      if (!std::isfinite(v)) throw NumericError("classifier: non-finite parameter in '" + p.name + "' (corrupt params)");
}

template <typename T>
Tensor<T> Classifier<T>::forward(const Tensor<T>& x, nn::Tape<T>* tape) const {
  const Shape& s = x.shape();
  if (s.h != arch_.image.h || s.w != arch_.image.w || s.c != arch_.image.c)
    throw ShapeError("classifier: input " + s.str() + " does not match canonical image shape");
  check_finite();
  return body_.forward(x, tape);
}

template <typename T>
Tensor<T> Classifier<T>::backward(const Tensor<T>& gy, nn::Tape<T>& tape, nn::Gradients<T>* grads) const {
  return body_.backward(gy, tape, grads);
}

template <typename T>
std::vector<nn::NamedParam<T>> Classifier<T>::params() {
  std::vector<nn::NamedParam<T>> out;
  body_.collect("", out);
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
  const auto k = static_cast<std::size_t>(logits.shape().item_size());
  std::vector<int> out(static_cast<std::size_t>(logits.shape().n));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T* row = logits.data() + i * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (row[j] > row[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

template class Generator<float>;
template class Generator<double>;
template class Discriminator<float>;
template class Discriminator<double>;
template class Classifier<float>;
template class Classifier<double>;
template std::vector<int> argmax_rows(const Tensor<float>&);
template std::vector<int> argmax_rows(const Tensor<double>&);

}  // namespace lcgan::models
