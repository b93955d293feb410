#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nasaswin/tensor.hpp"

namespace nasaswin {

/// Which denoiser produces the "clean" estimate the residual is taken against.
struct DenoiserSpec {
  enum class Kind { Median, Gaussian, External };
  Kind kind = Kind::Median;
  int median_k = 3;
  double sigma = 1.0;
  std::filesystem::path external_dir;

  /// Parses "median:3", "gaussian:1.0" or "external:DIR".
  static DenoiserSpec parse(std::string_view text);
  std::string to_string() const;
};

/// Denoises Tensor[3,h,w] (values in [0,1]); output clamped to [0,1].
/// Borders are handled by edge replication. `stem` names the precomputed
/// file for the external method (DIR/stem.png or DIR/stem.ppm).
Tensor denoise(const Tensor& image, const DenoiserSpec& spec, std::string_view stem = {});

/// image - denoised, unclamped.
Tensor residual(const Tensor& image, const Tensor& denoised);

/// Normalized 1-D Gaussian taps for the given sigma (radius ceil(3 sigma)).
std::vector<double> gaussian_taps(double sigma);

struct Spectrum {
  Tensor real;
  Tensor imag;
};

/// Unnormalized forward 2-D DFT of a real [h,w] map.
Spectrum fft2(const Tensor& x);

/// Moves the zero-frequency bin to (h/2, w/2).
Tensor fft_shift(const Tensor& x);

/// log(1 + |FFT2|), center-shifted, computed per channel of [c,h,w].
Tensor log_spectrum(const Tensor& maps);

/// Averages [c,h,w] over channels to [h,w].
Tensor channel_mean(const Tensor& maps);

struct CorpusStats {
  Tensor mean_residual;      // [3,h,w]
  Tensor mean_log_spectrum;  // [3,h,w]
  std::size_t count = 0;
};

/// Folds one residual into running means of the residual and its log spectrum.
CorpusStats accumulate_stats(const CorpusStats& stats, const Tensor& residual);

/// Count-weighted combination of two partial statistics.
CorpusStats merge_stats(const CorpusStats& a, const CorpusStats& b);

/// Ratio of the strongest high-frequency bin of a center-shifted [h,w]
/// spectrum to the median of that band. The band excludes the square of
/// bins within h/8, w/8 of the zero frequency, where image content lives.
double peak_contrast(const Tensor& shifted_spectrum);

}  // namespace nasaswin
