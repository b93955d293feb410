#pragma once

#include <filesystem>
#include <stdexcept>

#include "nasaswin/tensor.hpp"

namespace nasaswin {

/// Raised for unreadable or malformed input files.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an 8-bit PNG or PPM/PGM (P5/P6) into Tensor[3,h,w] scaled to [0,1].
/// Grayscale inputs are replicated to three channels; alpha is dropped.
Tensor read_image(const std::filesystem::path& path);

/// Writes Tensor[3,h,w] with values in [0,1] (clamped, rounded) as 8-bit RGB.
/// Format chosen by extension: .png or .ppm.
void write_image(const std::filesystem::path& path, const Tensor& rgb);

/// Writes a [h,w] map as 8-bit PGM, min-max normalized to [0,255].
void write_pgm_heatmap(const std::filesystem::path& path, const Tensor& map);

}  // namespace nasaswin
