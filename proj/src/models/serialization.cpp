#include "lcgan/models/serialization.hpp"

namespace lcgan::models {

namespace {

std::vector<std::int64_t> dims(const Shape& s) { return {s.n, s.h, s.w, s.c}; }

}  // namespace

template <typename T>
void store_params(TensorArchive& ar, const std::string& prefix, const std::vector<nn::NamedParam<T>>& params) {
  for (const auto& p : params) {
    std::vector<float> v(p.value->values().begin(), p.value->values().end());
    ar.put(prefix + "/" + p.name, dims(p.value->shape()), std::move(v));
  }
}

template <typename T>
void load_params(const TensorArchive& ar, const std::string& prefix, const std::vector<nn::NamedParam<T>>& params) {
  for (const auto& p : params) {
    const auto& e = ar.get(prefix + "/" + p.name);
    if (e.is_int || e.shape != dims(p.value->shape()))
      throw FormatError("archive tensor '" + prefix + "/" + p.name + "' has the wrong shape or dtype");
    for (std::size_t i = 0; i < e.f32.size(); ++i) (*p.value)[i] = static_cast<T>(e.f32[i]);
  }
}

template void store_params(TensorArchive&, const std::string&, const std::vector<nn::NamedParam<float>>&);
template void store_params(TensorArchive&, const std::string&, const std::vector<nn::NamedParam<double>>&);
template void load_params(const TensorArchive&, const std::string&, const std::vector<nn::NamedParam<float>>&);
template void load_params(const TensorArchive&, const std::string&, const std::vector<nn::NamedParam<double>>&);

Generator<float> generator_from_archive(const TensorArchive& ar, const std::string& prefix) {
  Rng rng(0);
  Generator<float> g(generator_arch_from_json(ar.metadata.at("architectures").at(prefix)), rng);
  load_params(ar, prefix, g.params());
  return g;
}

Discriminator<float> discriminator_from_archive(const TensorArchive& ar, const std::string& prefix) {
  Rng rng(0);
  Discriminator<float> d(discriminator_arch_from_json(ar.metadata.at("architectures").at(prefix)), rng);
  load_params(ar, prefix, d.params());
  return d;
}

Classifier<float> classifier_from_archive(const TensorArchive& ar, const std::string& prefix) {
  Rng rng(0);
  Classifier<float> c(classifier_arch_from_json(ar.metadata.at("architectures").at(prefix)), rng);
  load_params(ar, prefix, c.params());
  return c;
}

void save_classifier(const std::filesystem::path& path, Classifier<float>& net, const nlohmann::json& extra) {
  TensorArchive ar;
  ar.metadata = extra.is_object() ? extra : nlohmann::json::object();
  ar.metadata["architectures"]["classifier"] = to_json(net.arch());
  store_params(ar, "classifier", net.params());
  ar.save(path);
}

Classifier<float> load_classifier(const std::filesystem::path& path) {
  return classifier_from_archive(TensorArchive::load(path), "classifier");
}

void save_generator(const std::filesystem::path& path, Generator<float>& net, const nlohmann::json& extra) {
  TensorArchive ar;
  ar.metadata = extra.is_object() ? extra : nlohmann::json::object();
  ar.metadata["architectures"]["generator"] = to_json(net.arch());
  store_params(ar, "generator", net.params());
  ar.save(path);
}

Generator<float> load_generator(const std::filesystem::path& path) {
  return generator_from_archive(TensorArchive::load(path), "generator");
}

}  // namespace lcgan::models
