#include "nasaswin/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace nasaswin {

namespace {

constexpr std::array<char, 4> kMagic{'N', 'S', 'W', '1'};
// Guards against absurd allocations from corrupt headers.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw CheckpointError("truncated archive");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void write_archive(std::ostream& out, const std::vector<ArchiveEntry>& entries) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (numel(e.shape) != e.values.size()) {
      throw CheckpointError("entry '" + e.name + "' has " + std::to_string(e.values.size()) + " values for shape " +
                            to_string(e.shape));
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put<std::uint64_t>(out, d);
    for (double v : e.values) put<double>(out, v);
  }
  if (!out) throw CheckpointError("failed writing archive");
}

std::vector<ArchiveEntry> read_archive(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError("bad archive magic (expected NSW1)");
  }
  const auto count = get<std::uint32_t>(in);
  std::vector<ArchiveEntry> entries;
  entries.reserve(std::min<std::uint32_t>(count, 4096));
  for (std::uint32_t i = 0; i < count; ++i) {
    ArchiveEntry e;
    const auto name_len = get<std::uint32_t>(in);
    if (name_len > 4096) throw CheckpointError("corrupt entry name length");
    e.name.resize(name_len);
    if (!in.read(e.name.data(), name_len)) throw CheckpointError("truncated archive");
    const auto rank = get<std::uint32_t>(in);
    if (rank > 16) throw CheckpointError("corrupt rank for entry '" + e.name + "'");
    std::uint64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto d = get<std::uint64_t>(in);
      n *= d;
      if (n > kMaxElements) throw CheckpointError("corrupt extent for entry '" + e.name + "'");
      e.shape.push_back(static_cast<std::size_t>(d));
    }
    e.values.resize(static_cast<std::size_t>(n));
    for (auto& v : e.values) v = get<double>(in);
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_archive(const std::filesystem::path& path, const std::vector<ArchiveEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_archive(out, entries);
}

std::vector<ArchiveEntry> load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_archive(in);
}

}  // namespace nasaswin
