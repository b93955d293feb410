#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "nasaswin/tensor.hpp"

namespace nasaswin {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArchiveEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// Archive layout, all integers little-endian:
//   "NSW1" | u32 entry_count | entries...
//   entry: u32 name_len | name bytes | u32 rank | u64 extent[rank] | f64 value[numel]
void write_archive(std::ostream& out, const std::vector<ArchiveEntry>& entries);
std::vector<ArchiveEntry> read_archive(std::istream& in);

void save_archive(const std::filesystem::path& path, const std::vector<ArchiveEntry>& entries);
std::vector<ArchiveEntry> load_archive(const std::filesystem::path& path);

}  // namespace nasaswin
