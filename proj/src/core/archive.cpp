#include "lcgan/core/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "lcgan/core/error.hpp"

namespace lcgan {
namespace {

constexpr char kMagic[8] = {'L', 'C', 'G', 'A', 'N', 'A', 'R', 'C'};

void append_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t read_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::size_t element_count(const std::vector<std::int64_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw FormatError("archive: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

void TensorArchive::put(std::string name, std::vector<std::int64_t> shape, std::vector<float> values) {
  if (element_count(shape) != values.size()) throw ShapeError("archive entry '" + name + "': size/shape mismatch");
  ArchiveEntry e;
  e.name = std::move(name);
  e.shape = std::move(shape);
  e.f32 = std::move(values);
  entries_.push_back(std::move(e));
}

void TensorArchive::put_ints(std::string name, std::vector<std::int64_t> shape, std::vector<std::int32_t> values) {
  if (element_count(shape) != values.size()) throw ShapeError("archive entry '" + name + "': size/shape mismatch");
  ArchiveEntry e;
  e.name = std::move(name);
  e.shape = std::move(shape);
  e.i32 = std::move(values);
  e.is_int = true;
  entries_.push_back(std::move(e));
}

bool TensorArchive::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

const ArchiveEntry& TensorArchive::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw FormatError("archive: no tensor named '" + name + "'");
}

std::vector<std::uint8_t> TensorArchive::serialize() const {
  nlohmann::json header;
  header["metadata"] = metadata;
  header["tensors"] = nlohmann::json::array();
  std::vector<std::uint8_t> payload;
  for (const auto& e : entries_) {
    const std::size_t count = e.is_int ? e.i32.size() : e.f32.size();
    header["tensors"].push_back({{"name", e.name},
                                 {"dtype", e.is_int ? "i32" : "f32"},
                                 {"shape", e.shape},
                                 {"offset", payload.size()},
                                 {"bytes", count * 4}});
    payload.reserve(payload.size() + count * 4);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t bits =
          e.is_int ? static_cast<std::uint32_t>(e.i32[i]) : std::bit_cast<std::uint32_t>(e.f32[i]);
      append_u32_le(payload, bits);
    }
  }
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  const std::uint64_t len = text.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

TensorArchive TensorArchive::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw FormatError("archive: bad magic (not an LCGANARC file)");
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
  if (len > bytes.size() - 16) throw FormatError("archive: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("archive: header is not valid JSON: ") + e.what());
  }
  const std::size_t payload_start = 16 + len;
  TensorArchive ar;
  ar.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& t : header.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    const auto shape = t.at("shape").get<std::vector<std::int64_t>>();
    const auto offset = t.at("offset").get<std::size_t>();
    const std::size_t count = element_count(shape);
    if (t.at("bytes").get<std::size_t>() != count * 4) throw FormatError("archive: byte count mismatch for " + name);
    if (payload_start + offset + count * 4 > bytes.size()) throw FormatError("archive: truncated tensor " + name);
    const std::uint8_t* p = bytes.data() + payload_start + offset;
    if (t.at("dtype").get<std::string>() == "i32") {
      std::vector<std::int32_t> v(count);
      for (std::size_t i = 0; i < count; ++i) v[i] = static_cast<std::int32_t>(read_u32_le(p + 4 * i));
      ar.put_ints(name, shape, std::move(v));
    } else {
      std::vector<float> v(count);
      for (std::size_t i = 0; i < count; ++i) v[i] = std::bit_cast<float>(read_u32_le(p + 4 * i));
      ar.put(name, shape, std::move(v));
    }
  }
  return ar;
}

void TensorArchive::save(const std::filesystem::path& path) const { write_file_bytes(path, serialize()); }

TensorArchive TensorArchive::load(const std::filesystem::path& path) { return deserialize(read_file_bytes(path)); }

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace lcgan
