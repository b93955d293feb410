#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nasaswin/fusion.hpp"
#include "nasaswin/image_io.hpp"
#include "nasaswin/noise.hpp"

namespace nasaswin {

enum class Label : int { Genuine = 0, Generated = 1 };

enum class Split { Train, Val, Test };

struct ManifestEntry {
  std::filesystem::path path;
  int label = 0;
  std::string source;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  Split split = Split::Train;
  /// Entries whose path already appeared earlier in the file.
  std::size_t duplicate_paths = 0;

  /// Distinct sources in order of first appearance.
  std::vector<std::string> sources() const;
};

/// Reads a CSV with header `path,label,source`. Relative paths resolve
/// against the manifest's directory. Entry order is file order.
/// Throws IngestionError (with the line number) for missing files, bad
/// labels, malformed rows or an empty data section.
DatasetManifest load_manifest(const std::filesystem::path& path, Split split = Split::Train);

struct ImageRecord {
  Tensor rgb;                     // [3,h,w] in [0,1]
  std::optional<Tensor> residual; // rgb - denoised(rgb)
  int label = 0;
  std::string source;
  std::string stem;
};

ImageRecord load_record(const ManifestEntry& entry);

/// Largest centered square; the offset along the long side is (long-short)/2.
Tensor center_crop_square(const Tensor& rgb);
/// Half-pixel-center bilinear resampling; identity when sizes match.
Tensor resize_bilinear(const Tensor& img, std::size_t height, std::size_t width);

inline constexpr double kResidualScale = 5.0;

/// crop -> resize -> residual -> RGB centred to [-1,1] and residual scaled
/// by 5 then clamped to [-1,1] -> interleave.
FusedInput preprocess(const ImageRecord& record, std::size_t height, std::size_t width, const DenoiserSpec& denoiser);

struct Sample {
  FusedInput input;
  int label = 0;
  std::string source;
};

/// Loads and preprocesses every manifest entry, in manifest order.
std::vector<Sample> prepare_samples(const DatasetManifest& manifest, std::size_t height, std::size_t width,
                                    const DenoiserSpec& denoiser, std::size_t workers);

}  // namespace nasaswin
