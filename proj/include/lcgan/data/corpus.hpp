#pragma once

// Labeled image collections and the manifests that declare them.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcgan/core/archive.hpp"
#include "lcgan/core/tensor.hpp"

namespace lcgan::data {

enum class Domain { real, simulated };
enum class Split { train, val, test };
enum class Source { synthetic, idx_files, png_directory };

std::string to_string(Domain d);
std::string to_string(Split s);
std::string to_string(Source s);
Domain domain_from_string(const std::string& s);

/// One image (h x w x c, values in [-1, 1]) with its class index.
struct LabeledImage {
  std::vector<float> pixels;
  ImageShape shape;
  int label = 0;
  Domain domain = Domain::real;
};

/// Images stored contiguously, item i at pixels[i * shape.size()].
class Corpus {
 public:
  Corpus() = default;
  Corpus(Domain domain, int class_count, ImageShape shape)
      : domain_(domain), class_count_(class_count), shape_(shape) {}

  Domain domain() const { return domain_; }
  void set_domain(Domain d) { domain_ = d; }
  int class_count() const { return class_count_; }
  const ImageShape& shape() const { return shape_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  std::span<const float> image(std::size_t i) const { return {pixels_.data() + i * shape_.size(), shape_.size()}; }
  std::span<float> image(std::size_t i) { return {pixels_.data() + i * shape_.size(), shape_.size()}; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<float>& pixels() const { return pixels_; }
  LabeledImage at(std::size_t i) const;

  /// Throws if the label is outside [0, K), the size is wrong or a pixel is
  /// outside [-1, 1].
  void append(std::span<const float> pixels, int label);
  void reserve(std::size_t n);

  /// Items in the given order as one batch tensor.
  Tensor<float> gather(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
  Tensor<float> all_images() const;

  /// Count of items per class, length K.
  std::vector<std::size_t> class_counts() const;
  /// Sub-corpus of the given items, in the given order.
  Corpus subset(std::span<const std::size_t> indices) const;

  bool operator==(const Corpus&) const = default;

 private:
  Domain domain_ = Domain::real;
  int class_count_ = 0;
  ImageShape shape_;
  std::vector<float> pixels_;
  std::vector<int> labels_;
};

/// Declarative description of one corpus split. Field names in JSON match the
/// member names; the paths, root and horizontal_flip are optional.
struct DatasetManifest {
  std::string name;
  Domain domain = Domain::real;
  int class_count = 0;
  ImageShape image_shape;
  Split split = Split::train;
  std::vector<int> item_count_per_class;
  Source source = Source::synthetic;
  std::uint64_t seed = 0;

  // idx_files: image and label file paths; png_directory: root directory.
  // Relative paths resolve against the manifest file's directory.
  std::string images_path;
  std::string labels_path;
  std::string root;
  // Appends a mirrored copy of every item after generation.
  bool horizontal_flip = false;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

nlohmann::json to_json(const DatasetManifest& m);
/// Parses and validates; errors name the offending field.
DatasetManifest manifest_from_json(const nlohmann::json& j);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);

/// Builds the corpus a manifest declares; relative paths resolve against
/// base_dir.
Corpus build_corpus(const DatasetManifest& m, const std::filesystem::path& base_dir = {});

/// Corpus files are TensorArchives with "pixels" (f32, n x h x w x c) and
/// "labels" (i32, n) entries.
void save_corpus(const std::filesystem::path& path, const Corpus& c, const nlohmann::json& extra = {});
Corpus load_corpus(const std::filesystem::path& path);

/// Mirror image along the width axis.
void flip_horizontal(std::span<float> pixels, const ImageShape& shape);
/// Appends a mirrored copy of every item, in item order.
void append_mirrored_copies(Corpus& c);

}  // namespace lcgan::data
