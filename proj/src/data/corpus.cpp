#include "lcgan/data/corpus.hpp"

#include <cstring>
#include <fstream>

#include "lcgan/data/ingest.hpp"
#include "lcgan/data/synthetic.hpp"

namespace lcgan::data {

std::string to_string(Domain d) { return d == Domain::real ? "real" : "simulated"; }

std::string to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

std::string to_string(Source s) {
  switch (s) {
    case Source::synthetic:
      return "synthetic";
    case Source::idx_files:
      return "idx_files";
    case Source::png_directory:
      return "png_directory";
  }
  return "?";
}

Domain domain_from_string(const std::string& s) {
  if (s == "real") return Domain::real;
  if (s == "simulated") return Domain::simulated;
  throw InvalidArgument("unknown domain '" + s + "' (expected real or simulated)");
}

LabeledImage Corpus::at(std::size_t i) const {
  const auto px = image(i);
  return {std::vector<float>(px.begin(), px.end()), shape_, labels_[i], domain_};
}

void Corpus::append(std::span<const float> pixels, int label) {
  if (pixels.size() != shape_.size())
    throw ShapeError("corpus append: image has " + std::to_string(pixels.size()) + " values, expected " +
                     std::to_string(shape_.size()));
  if (label < 0 || label >= class_count_)
    throw InvalidArgument("corpus append: label " + std::to_string(label) + " outside [0, " +
                          std::to_string(class_count_) + ")");
  for (float v : pixels)
    if (!(v >= -1.0f && v <= 1.0f)) throw InvalidArgument("corpus append: pixel value outside [-1, 1]");
  pixels_.insert(pixels_.end(), pixels.begin(), pixels.end());
  labels_.push_back(label);
}

void Corpus::reserve(std::size_t n) {
  pixels_.reserve(n * shape_.size());
  labels_.reserve(n);
}

Tensor<float> Corpus::gather(std::span<const std::size_t> indices) const {
  Tensor<float> out(shape_.batch(static_cast<int>(indices.size())));
  const std::size_t sz = shape_.size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw InvalidArgument("corpus gather: index out of range");
    std::memcpy(out.data() + i * sz, pixels_.data() + indices[i] * sz, sz * sizeof(float));
  }
  return out;
}

std::vector<int> Corpus::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels_.at(i));
  return out;
}

Tensor<float> Corpus::all_images() const { return Tensor<float>(shape_.batch(static_cast<int>(size())), pixels_); }

std::vector<std::size_t> Corpus::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(class_count_), 0);
  for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

Corpus Corpus::subset(std::span<const std::size_t> indices) const {
  Corpus out(domain_, class_count_, shape_);
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw InvalidArgument("corpus subset: index out of range");
    out.pixels_.insert(out.pixels_.end(), image(i).begin(), image(i).end());
    out.labels_.push_back(labels_[i]);
  }
  return out;
}

void flip_horizontal(std::span<float> pixels, const ImageShape& s) {
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w / 2; ++x)
      for (int c = 0; c < s.c; ++c) {
        const std::size_t row = static_cast<std::size_t>(y) * s.w;
        std::swap(pixels[(row + x) * s.c + c], pixels[(row + s.w - 1 - x) * s.c + c]);
      }
}

void append_mirrored_copies(Corpus& c) {
  const std::size_t n = c.size();
  c.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> px(c.image(i).begin(), c.image(i).end());
    flip_horizontal(px, c.shape());
    c.append(px, c.label(i));
  }
}

// ------------------------------------------------------------- manifests

void DatasetManifest::validate() const {
  if (name.empty()) throw ConfigError("name", "must be a non-empty string");
  if (class_count < 2) throw ConfigError("class_count", "need at least 2 classes, got " + std::to_string(class_count));
  if (image_shape.h <= 0 || image_shape.w <= 0 || image_shape.c <= 0)
    throw ConfigError("image_shape", "dimensions must be positive");
  if (image_shape.h < 16 || image_shape.w < 16)
    throw ConfigError("image_shape", "unsupported shape: sides below 16 pixels");
  if (!item_count_per_class.empty()) {
    if (item_count_per_class.size() != static_cast<std::size_t>(class_count))
      throw ConfigError("item_count_per_class", "needs exactly class_count entries");
    long long sum = 0;
    for (int n : item_count_per_class) {
      if (n < 0) throw ConfigError("item_count_per_class", "entries must be non-negative");
      sum += n;
    }
    if (split == Split::train && sum == 0) throw ConfigError("item_count_per_class", "train split must not be empty");
  }
  if (source == Source::idx_files && (images_path.empty() || labels_path.empty()))
    throw ConfigError(images_path.empty() ? "images_path" : "labels_path", "required for idx_files sources");
  if (source == Source::png_directory && root.empty()) throw ConfigError("root", "required for png_directory sources");
}

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json j = {{"name", m.name},
                      {"domain", to_string(m.domain)},
                      {"class_count", m.class_count},
                      {"image_shape", {m.image_shape.h, m.image_shape.w, m.image_shape.c}},
                      {"split", to_string(m.split)},
                      {"item_count_per_class", m.item_count_per_class},
                      {"source", to_string(m.source)},
                      {"seed", m.seed}};
  if (!m.images_path.empty()) j["images_path"] = m.images_path;
  if (!m.labels_path.empty()) j["labels_path"] = m.labels_path;
  if (!m.root.empty()) j["root"] = m.root;
  if (m.horizontal_flip) j["horizontal_flip"] = true;
  return j;
}

namespace {

template <typename T, typename Fn>
T field(const nlohmann::json& j, const char* key, Fn&& convert) {
  if (!j.contains(key)) throw ConfigError(key, "missing");
  try {
    return convert(j.at(key));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<manifest>", "expected a JSON object");
  static const char* known[] = {"name",   "domain", "class_count", "image_shape", "split",
                                "item_count_per_class", "source", "seed", "images_path", "labels_path",
                                "root",   "horizontal_flip"};
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigError(k, "unknown manifest field");
  }
  DatasetManifest m;
  m.name = field<std::string>(j, "name", [](const auto& v) { return v.template get<std::string>(); });
  m.domain = field<Domain>(j, "domain", [](const auto& v) { return domain_from_string(v.template get<std::string>()); });
  m.class_count = field<int>(j, "class_count", [](const auto& v) { return v.template get<int>(); });
  m.image_shape = field<ImageShape>(j, "image_shape", [](const nlohmann::json& v) {
    const auto dims = v.get<std::vector<int>>();
    if (dims.size() != 3) throw std::runtime_error("expected [height, width, channels]");
    return ImageShape{dims[0], dims[1], dims[2]};
  });
  m.split = field<Split>(j, "split", [](const nlohmann::json& v) {
    const auto s = v.get<std::string>();
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw std::runtime_error("unknown split '" + s + "'");
  });
  m.item_count_per_class =
      field<std::vector<int>>(j, "item_count_per_class", [](const auto& v) { return v.template get<std::vector<int>>(); });
  m.source = field<Source>(j, "source", [](const nlohmann::json& v) {
    const auto s = v.get<std::string>();
    if (s == "synthetic") return Source::synthetic;
    if (s == "idx_files") return Source::idx_files;
    if (s == "png_directory") return Source::png_directory;
    throw std::runtime_error("unknown source '" + s + "'");
  });
  m.seed = field<std::uint64_t>(j, "seed", [](const auto& v) { return v.template get<std::uint64_t>(); });
  auto optional_string = [&](const char* key, std::string& out) {
    if (j.contains(key)) out = field<std::string>(j, key, [](const auto& v) { return v.template get<std::string>(); });
  };
  optional_string("images_path", m.images_path);
  optional_string("labels_path", m.labels_path);
  optional_string("root", m.root);
  if (j.contains("horizontal_flip"))
    m.horizontal_flip = field<bool>(j, "horizontal_flip", [](const auto& v) { return v.template get<bool>(); });
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<manifest>", path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j);
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  const std::string text = to_json(m).dump(2) + "\n";
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Corpus build_corpus(const DatasetManifest& m, const std::filesystem::path& base_dir) {
  m.validate();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  switch (m.source) {
    case Source::synthetic:
      return build_synthetic_corpus(m);
    case Source::idx_files:
      return ingest_idx(resolve(m.images_path), resolve(m.labels_path), m);
    case Source::png_directory:
      return ingest_png_directory(resolve(m.root), m);
  }
  throw InvalidArgument("unknown source");
}

// ---------------------------------------------------------- corpus files

void save_corpus(const std::filesystem::path& path, const Corpus& c, const nlohmann::json& extra) {
  TensorArchive ar;
  ar.metadata = {{"kind", "corpus"},
                 {"domain", to_string(c.domain())},
                 {"class_count", c.class_count()},
                 {"image_shape", {c.shape().h, c.shape().w, c.shape().c}}};
  if (!extra.is_null()) ar.metadata["extra"] = extra;
  const auto n = static_cast<std::int64_t>(c.size());
  ar.put("pixels", {n, c.shape().h, c.shape().w, c.shape().c}, c.pixels());
  ar.put_ints("labels", {n}, std::vector<std::int32_t>(c.labels().begin(), c.labels().end()));
  ar.save(path);
}

Corpus load_corpus(const std::filesystem::path& path) {
  const TensorArchive ar = TensorArchive::load(path);
  const auto& md = ar.metadata;
  if (md.value("kind", "") != "corpus") throw FormatError(path.string() + " is not a corpus file");
  const auto dims = md.at("image_shape").get<std::vector<int>>();
  Corpus c(domain_from_string(md.at("domain").get<std::string>()), md.at("class_count").get<int>(),
           ImageShape{dims.at(0), dims.at(1), dims.at(2)});
  const auto& px = ar.get("pixels");
  const auto& lb = ar.get("labels");
  const std::size_t n = lb.i32.size();
  if (px.f32.size() != n * c.shape().size()) throw FormatError(path.string() + ": pixel and label counts disagree");
  c.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    c.append(std::span<const float>(px.f32.data() + i * c.shape().size(), c.shape().size()), lb.i32[i]);
  return c;
}

}  // namespace lcgan::data
