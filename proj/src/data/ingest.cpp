#include "lcgan/data/ingest.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cmath>
#include <map>

namespace lcgan::data {

namespace {

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t at, const std::filesystem::path& path) {
  if (at + 4 > b.size()) throw FormatError(path.string() + ": truncated IDX header");
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) | (std::uint32_t(b[at + 2]) << 8) |
         std::uint32_t(b[at + 3]);
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto b = read_file_bytes(path);
  const std::uint32_t magic = read_be32(b, 0, path);
  if (magic != kIdxImages)
    throw FormatError(path.string() + ": IDX magic " + hex(magic) + ", expected " + hex(kIdxImages));
  IdxImages out;
  out.count = read_be32(b, 4, path);
  out.rows = static_cast<int>(read_be32(b, 8, path));
  out.cols = static_cast<int>(read_be32(b, 12, path));
  const std::size_t need = out.count * static_cast<std::size_t>(out.rows) * static_cast<std::size_t>(out.cols);
  if (b.size() - 16 < need)
    throw FormatError(path.string() + ": truncated IDX image data (" + std::to_string(b.size() - 16) + " of " +
                      std::to_string(need) + " bytes)");
  out.bytes.assign(b.begin() + 16, b.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return out;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  const auto b = read_file_bytes(path);
  const std::uint32_t magic = read_be32(b, 0, path);
  if (magic != kIdxLabels)
    throw FormatError(path.string() + ": IDX magic " + hex(magic) + ", expected " + hex(kIdxLabels));
  const std::size_t n = read_be32(b, 4, path);
  if (b.size() - 8 < n) throw FormatError(path.string() + ": truncated IDX label data");
  return {b.begin() + 8, b.begin() + 8 + static_cast<std::ptrdiff_t>(n)};
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  std::vector<std::uint8_t> b;
  put_be32(b, kIdxImages);
  put_be32(b, static_cast<std::uint32_t>(images.count));
  put_be32(b, static_cast<std::uint32_t>(images.rows));
  put_be32(b, static_cast<std::uint32_t>(images.cols));
  b.insert(b.end(), images.bytes.begin(), images.bytes.end());
  write_file_bytes(path, b);
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> b;
  put_be32(b, kIdxLabels);
  put_be32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  write_file_bytes(path, b);
}

std::vector<float> resize_bilinear(std::span<const float> src, ImageShape from, int to_h, int to_w) {
  if (from.h == to_h && from.w == to_w) return {src.begin(), src.end()};
  std::vector<float> out(static_cast<std::size_t>(to_h) * to_w * from.c);
  auto coord = [](int o, int n_in, int n_out, int& i0, int& i1, double& t) {
    const double s = (o + 0.5) * n_in / n_out - 0.5;
    const double f = std::floor(s);
    i0 = std::clamp(static_cast<int>(f), 0, n_in - 1);
    i1 = std::clamp(static_cast<int>(f) + 1, 0, n_in - 1);
    t = std::clamp(s - f, 0.0, 1.0);
    if (s < 0) t = 0;
  };
  for (int y = 0; y < to_h; ++y) {
    int y0, y1;
    double ty;
    coord(y, from.h, to_h, y0, y1, ty);
    for (int x = 0; x < to_w; ++x) {
      int x0, x1;
      double tx;
      coord(x, from.w, to_w, x0, x1, tx);
      for (int c = 0; c < from.c; ++c) {
        auto px = [&](int yy, int xx) {
          return static_cast<double>(src[(static_cast<std::size_t>(yy) * from.w + xx) * from.c + c]);
        };
        const double top = px(y0, x0) * (1 - tx) + px(y0, x1) * tx;
        const double bot = px(y1, x0) * (1 - tx) + px(y1, x1) * tx;
        out[(static_cast<std::size_t>(y) * to_w + x) * from.c + c] = static_cast<float>(top * (1 - ty) + bot * ty);
      }
    }
  }
  return out;
}

std::vector<float> convert_channels(std::span<const float> src, ImageShape from, int channels) {
  if (from.c == channels) return {src.begin(), src.end()};
  const std::size_t pixels = static_cast<std::size_t>(from.h) * from.w;
  std::vector<float> out(pixels * channels);
  for (std::size_t p = 0; p < pixels; ++p) {
    float v;
    if (from.c == 1)
      v = src[p];
    else if (from.c >= 3)
      v = static_cast<float>(0.299 * src[p * from.c] + 0.587 * src[p * from.c + 1] + 0.114 * src[p * from.c + 2]);
    else
      throw ShapeError("cannot convert " + std::to_string(from.c) + "-channel images");
    if (channels >= 3 && from.c >= 3) {
      for (int c = 0; c < channels; ++c) out[p * channels + c] = src[p * from.c + c % from.c];
    } else {
      for (int c = 0; c < channels; ++c) out[p * channels + c] = v;
    }
  }
  return out;
}

namespace {

// Keeps the first n_k items of each class when caps are declared.
class ClassCaps {
 public:
  explicit ClassCaps(const DatasetManifest& m) : caps_(m.item_count_per_class), taken_(m.class_count, 0) {}
  bool take(int label) {
    if (caps_.empty()) return true;
    auto& t = taken_[static_cast<std::size_t>(label)];
    if (t >= caps_[static_cast<std::size_t>(label)]) return false;
    ++t;
    return true;
  }
  void require_filled(const std::string& what) const {
    for (std::size_t k = 0; k < caps_.size(); ++k)
      if (taken_[k] < caps_[k])
        throw ConfigError("item_count_per_class", what + " has only " + std::to_string(taken_[k]) + " items of class " +
                                                      std::to_string(k) + ", manifest asks for " +
                                                      std::to_string(caps_[k]));
  }

 private:
  std::vector<int> caps_;
  std::vector<int> taken_;
};

std::vector<float> to_manifest_shape(std::vector<float> px, ImageShape from, const ImageShape& to) {
  px = resize_bilinear(px, from, to.h, to.w);
  return convert_channels(px, {to.h, to.w, from.c}, to.c);
}

}  // namespace

Corpus ingest_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                  const DatasetManifest& m) {
  const IdxImages img = read_idx_images(images_path);
  const auto labels = read_idx_labels(labels_path);
  if (labels.size() != img.count)
    throw FormatError("IDX count mismatch: " + std::to_string(img.count) + " images but " +
                      std::to_string(labels.size()) + " labels");
  const ImageShape from{img.rows, img.cols, 1};
  Corpus out(m.domain, m.class_count, m.image_shape);
  ClassCaps caps(m);
  std::vector<float> px(from.size());
  for (std::size_t i = 0; i < img.count; ++i) {
    const int y = labels[i];
    if (y >= m.class_count)
      throw FormatError(labels_path.string() + ": label " + std::to_string(y) + " outside class_count " +
                        std::to_string(m.class_count));
    if (!caps.take(y)) continue;
    const std::uint8_t* src = img.bytes.data() + i * from.size();
    for (std::size_t p = 0; p < from.size(); ++p) px[p] = byte_to_pixel(src[p]);
    out.append(to_manifest_shape(px, from, m.image_shape), y);
  }
  caps.require_filled(images_path.string());
  if (m.horizontal_flip) append_mirrored_copies(out);
  return out;
}

Corpus ingest_png_directory(const std::filesystem::path& root, const DatasetManifest& m) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("PNG root " + root.string() + " is not a directory");
  std::map<int, std::vector<fs::path>> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    int label = -1;
    try {
      std::size_t used = 0;
      label = std::stoi(name, &used);
      if (used != name.size()) label = -1;
    } catch (const std::exception&) {
    }
    if (label < 0 || label >= m.class_count)
      throw FormatError(entry.path().string() + ": directory name is not a class index below " +
                        std::to_string(m.class_count));
    auto& list = files[label];
    for (const auto& f : fs::directory_iterator(entry.path()))
      if (f.is_regular_file() && f.path().extension() == ".png") list.push_back(f.path());
    std::sort(list.begin(), list.end());
  }
  Corpus out(m.domain, m.class_count, m.image_shape);
  ClassCaps caps(m);
  for (const auto& [label, list] : files)
    for (const auto& path : list) {
      if (!caps.take(label)) break;
      const PngImage png = read_png(path);
      std::vector<float> px(png.bytes.size());
      for (std::size_t i = 0; i < px.size(); ++i) px[i] = byte_to_pixel(png.bytes[i]);
      out.append(to_manifest_shape(px, {png.height, png.width, png.channels}, m.image_shape), label);
    }
  caps.require_filled(root.string());
  if (m.horizontal_flip) append_mirrored_copies(out);
  return out;
}

PngImage read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw FormatError(path.string() + ": " + img.message);
  PngImage out;
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.channels = gray ? 1 : 3;
  out.bytes.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.bytes.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw FormatError(path.string() + ": " + msg);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const PngImage& image,
               const std::vector<std::pair<std::string, std::string>>& text) {
  if (image.channels != 1 && image.channels != 3) throw InvalidArgument("write_png: 1 or 3 channels supported");
  if (image.bytes.size() != static_cast<std::size_t>(image.width) * image.height * image.channels)
    throw ShapeError("write_png: byte count does not match dimensions");
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    std::fclose(fp);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("cannot write " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  std::vector<png_text> chunks(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
    chunks[i].key = const_cast<char*>(text[i].first.c_str());
    chunks[i].text = const_cast<char*>(text[i].second.c_str());
    chunks[i].text_length = text[i].second.size();
  }
  if (!chunks.empty()) png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y)
    png_write_row(png, const_cast<png_bytep>(image.bytes.data() + y * stride));
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace lcgan::data
