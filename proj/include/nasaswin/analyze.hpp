#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nasaswin/dataset.hpp"
#include "nasaswin/noise.hpp"

namespace nasaswin {

struct SourceAnalysis {
  std::string source;
  CorpusStats stats;
  double peak_contrast = 0.0;  // of the channel-mean log spectrum
  std::size_t skipped = 0;     // unreadable or shape-mismatched files
};

/// Per-source mean residuals and mean log spectra. Unreadable files are
/// skipped with a warning on stderr and counted. Per-image statistics are
/// combined by a fixed-order pairwise reduction, so results do not depend
/// on the worker count.
std::vector<SourceAnalysis> analyze_corpus(const DatasetManifest& manifest, const DenoiserSpec& denoiser,
                                           std::size_t workers);

/// Writes, per source: <src>_residual_c{0,1,2,mean}.pgm,
/// <src>_spectrum_c{0,1,2,mean}.pgm, <src>_spectrum.csv (bin_y,bin_x,value
/// of the channel-mean spectrum, bins centred on zero frequency), plus
/// summary.csv (source,count,skipped,peak_contrast).
void write_analysis(const std::vector<SourceAnalysis>& results, const std::filesystem::path& out_dir);

struct SynthOptions {
  std::size_t per_split = 128;  // images per split, half genuine
  std::size_t size = 32;
  std::uint64_t seed = 1;
  std::size_t grid_period = 4;
  double grid_amplitude = 12.0 / 255.0;
  double sensor_noise = 2.0 / 255.0;
  /// Offset the grid by a random (dy, dx) per image, so it does not line up
  /// with the 4x4 stem patches.
  bool random_phase = true;
};

/// Writes images/ plus train.csv and test.csv. Genuine images ("nature")
/// are smoothed random fields with mild sensor noise; generated images
/// ("sdv14") are produced the same way with a periodic grid added.
void synthesize_corpus(const std::filesystem::path& out_dir, const SynthOptions& opts);

/// One synthetic image, [3,size,size] in [0,1], already 8-bit quantized.
Tensor synth_image(std::uint64_t seed, bool generated, const SynthOptions& opts);

}  // namespace nasaswin
