#pragma once

// Reading external corpora: IDX binary files and PNG directory trees.

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "lcgan/data/corpus.hpp"

namespace lcgan::data {

/// Unsigned-byte IDX image file (magic 0x00000803): count x rows x cols.
struct IdxImages {
  std::size_t count = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> bytes;
};

IdxImages read_idx_images(const std::filesystem::path& path);
/// Unsigned-byte IDX label file (magic 0x00000801).
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);
void write_idx_images(const std::filesystem::path& path, const IdxImages& images);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

/// Byte b maps to 2b/255 - 1.
inline float byte_to_pixel(std::uint8_t b) { return 2.0f * static_cast<float>(b) / 255.0f - 1.0f; }

/// Bilinear resampling with half-pixel centers and edge clamping.
std::vector<float> resize_bilinear(std::span<const float> src, ImageShape from, int to_h, int to_w);

/// Converts an image with from.c channels to `channels`: single-channel input
/// is replicated, three-channel input reduced to one by luminance.
std::vector<float> convert_channels(std::span<const float> src, ImageShape from, int channels);

/// Loads an IDX image/label pair, rescales bytes to [-1, 1], resizes to the
/// manifest shape and replicates channels. A non-empty item_count_per_class
/// keeps the first n_k items of each class and requires that many.
Corpus ingest_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                  const DatasetManifest& m);

/// Loads <root>/<label>/<name>.png (label directories are class indices;
/// files within a class in lexicographic order).
Corpus ingest_png_directory(const std::filesystem::path& root, const DatasetManifest& m);

/// 8-bit PNG reading and writing; pixel bytes are row-major with `channels`
/// interleaved components.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> bytes;
};
PngImage read_png(const std::filesystem::path& path);
/// Text entries become uncompressed tEXt chunks (keys of 1-79 Latin-1 chars).
void write_png(const std::filesystem::path& path, const PngImage& image,
               const std::vector<std::pair<std::string, std::string>>& text = {});

}  // namespace lcgan::data
