#pragma once

// Storing network parameters in a TensorArchive. Entries are named
// "<prefix>/<param name>"; architecture JSON lives in the archive metadata.

#include <filesystem>
#include <string>
#include <vector>

#include "lcgan/core/archive.hpp"
#include "lcgan/models/networks.hpp"

namespace lcgan::models {

template <typename T>
void store_params(TensorArchive& ar, const std::string& prefix, const std::vector<nn::NamedParam<T>>& params);

/// Overwrites params from the archive; every name must be present with a
/// matching shape.
template <typename T>
void load_params(const TensorArchive& ar, const std::string& prefix, const std::vector<nn::NamedParam<T>>& params);

void save_classifier(const std::filesystem::path& path, Classifier<float>& net, const nlohmann::json& extra = {});
Classifier<float> load_classifier(const std::filesystem::path& path);

void save_generator(const std::filesystem::path& path, Generator<float>& net, const nlohmann::json& extra = {});
Generator<float> load_generator(const std::filesystem::path& path);

/// Restores a network stored under `prefix` with its architecture in
/// metadata["architectures"][prefix].
Generator<float> generator_from_archive(const TensorArchive& ar, const std::string& prefix);
Discriminator<float> discriminator_from_archive(const TensorArchive& ar, const std::string& prefix);
Classifier<float> classifier_from_archive(const TensorArchive& ar, const std::string& prefix);

}  // namespace lcgan::models
