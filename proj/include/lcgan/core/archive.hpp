#pragma once

// Named-tensor archive used for checkpoints and built corpora.
//
// Layout:
//   bytes 0..7   magic "LCGANARC"
//   bytes 8..15  header length L, unsigned 64-bit little-endian
//   next L bytes UTF-8 JSON header:
//                {"metadata": {...},
//                 "tensors": [{"name", "dtype": "f32"|"i32", "shape": [...],
//                              "offset", "bytes"}, ...]}
//   payload      tensors back to back, little-endian, row-major; offsets are
//                relative to the start of the payload.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lcgan {

struct ArchiveEntry {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> f32;        // dtype f32
  std::vector<std::int32_t> i32;  // dtype i32
  bool is_int = false;
};

class TensorArchive {
 public:
  nlohmann::json metadata = nlohmann::json::object();

  void put(std::string name, std::vector<std::int64_t> shape, std::vector<float> values);
  void put_ints(std::string name, std::vector<std::int64_t> shape, std::vector<std::int32_t> values);

  bool contains(const std::string& name) const;
  const ArchiveEntry& get(const std::string& name) const;
  const std::vector<ArchiveEntry>& entries() const { return entries_; }

  std::vector<std::uint8_t> serialize() const;
  static TensorArchive deserialize(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

 private:
  std::vector<ArchiveEntry> entries_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace lcgan
