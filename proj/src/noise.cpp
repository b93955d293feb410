#include "nasaswin/noise.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <new>
#include <stdexcept>

#include <fftw3.h>

#include "nasaswin/image_io.hpp"

namespace nasaswin {

namespace {

void require_image(const Tensor& t, const char* what) {
  if (t.dim() != 3) throw DimensionError(std::string(what) + " expects [c,h,w], got " + to_string(t.shape()));
}

std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

Tensor median_filter(const Tensor& img, int k) {
  if (k < 1 || k % 2 == 0) throw ConfigError("median kernel must be a positive odd size, got " + std::to_string(k));
  const std::size_t c = img.size(0), h = img.size(1), w = img.size(2);
  const std::ptrdiff_t r = k / 2;
  auto d = img.data();
  std::vector<double> out(img.numel());
  std::vector<double> window(static_cast<std::size_t>(k * k));
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        std::size_t n = 0;
        for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
          for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
            const std::size_t yy = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
            const std::size_t xx = clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w);
            window[n++] = d[(ch * h + yy) * w + xx];
          }
        auto mid = window.begin() + static_cast<std::ptrdiff_t>(n / 2);
        std::nth_element(window.begin(), mid, window.begin() + static_cast<std::ptrdiff_t>(n));
        out[(ch * h + y) * w + x] = *mid;
      }
  return Tensor::from(img.shape(), std::move(out));
}

Tensor gaussian_filter(const Tensor& img, double sigma) {
  const auto taps = gaussian_taps(sigma);
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const std::size_t c = img.size(0), h = img.size(1), w = img.size(2);
  auto d = img.data();
  std::vector<double> tmp(img.numel()), out(img.numel());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        // centre + sum w (v - centre): taps sum to one, and flat regions
        // come out bit-identical
        const double centre = d[(ch * h + y) * w + x];
        double s = 0.0;
        for (std::ptrdiff_t t = -r; t <= r; ++t)
          s += taps[static_cast<std::size_t>(t + r)] *
               (d[(ch * h + y) * w + clamp_index(static_cast<std::ptrdiff_t>(x) + t, w)] - centre);
        tmp[(ch * h + y) * w + x] = centre + s;
      }
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double centre = tmp[(ch * h + y) * w + x];
        double s = 0.0;
        for (std::ptrdiff_t t = -r; t <= r; ++t)
          s += taps[static_cast<std::size_t>(t + r)] *
               (tmp[(ch * h + clamp_index(static_cast<std::ptrdiff_t>(y) + t, h)) * w + x] - centre);
        out[(ch * h + y) * w + x] = centre + s;
      }
  return Tensor::from(img.shape(), std::move(out));
}

Tensor clamp01(const Tensor& t) {
  auto v = t.to_vector();
  for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
  return Tensor::from(t.shape(), std::move(v));
}

// FFTW planning is not thread-safe; execution is.
std::mutex g_fftw_plan_mutex;

}  // namespace

DenoiserSpec DenoiserSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("denoiser spec needs 'kind:param', got '" + std::string(text) + "'");
  const std::string kind(text.substr(0, colon));
  const std::string arg(text.substr(colon + 1));
  DenoiserSpec spec;
  try {
    if (kind == "median") {
      spec.kind = Kind::Median;
      std::size_t used = 0;
      spec.median_k = std::stoi(arg, &used);
      if (used != arg.size() || spec.median_k < 1 || spec.median_k % 2 == 0) throw std::invalid_argument(arg);
    } else if (kind == "gaussian") {
      spec.kind = Kind::Gaussian;
      std::size_t used = 0;
      spec.sigma = std::stod(arg, &used);
      if (used != arg.size() || !(spec.sigma > 0.0)) throw std::invalid_argument(arg);
    } else if (kind == "external") {
      spec.kind = Kind::External;
      if (arg.empty()) throw std::invalid_argument(arg);
      spec.external_dir = arg;
    } else {
      throw ConfigError("unknown denoiser '" + kind + "'");
    }
  } catch (const std::logic_error&) {
    throw ConfigError("bad denoiser parameter in '" + std::string(text) + "'");
  }
  return spec;
}

std::string DenoiserSpec::to_string() const {
  switch (kind) {
    case Kind::Median: return "median:" + std::to_string(median_k);
    case Kind::Gaussian: {
      std::string s = std::to_string(sigma);
      return "gaussian:" + s;
    }
    case Kind::External: return "external:" + external_dir.string();
  }
  return {};
}

std::vector<double> gaussian_taps(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian sigma must be positive");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * r + 1));
  double z = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + r)] = v;
    z += v;
  }
  for (auto& v : taps) v /= z;
  return taps;
}

Tensor denoise(const Tensor& image, const DenoiserSpec& spec, std::string_view stem) {
  require_image(image, "denoise");
  switch (spec.kind) {
    case DenoiserSpec::Kind::Median: return clamp01(median_filter(image, spec.median_k));
    case DenoiserSpec::Kind::Gaussian: return clamp01(gaussian_filter(image, spec.sigma));
    case DenoiserSpec::Kind::External: {
      for (const char* ext : {".png", ".ppm"}) {
        auto p = spec.external_dir / (std::string(stem) + ext);
        if (std::filesystem::exists(p)) {
          Tensor d = read_image(p);
          if (d.shape() != image.shape()) {
            throw IngestionError("external denoised image for '" + std::string(stem) + "' has shape " +
                                 to_string(d.shape()) + ", expected " + to_string(image.shape()));
          }
          return clamp01(d);
        }
      }
      throw IngestionError("no precomputed denoised image for stem '" + std::string(stem) + "' in " +
                           spec.external_dir.string());
    }
  }
  throw ConfigError("unknown denoiser kind");
}

Tensor residual(const Tensor& image, const Tensor& denoised) {
  if (image.shape() != denoised.shape()) {
    throw DimensionError("residual: shape mismatch " + to_string(image.shape()) + " vs " + to_string(denoised.shape()));
  }
  auto a = image.data();
  auto b = denoised.data();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::from(image.shape(), std::move(out));
}

Spectrum fft2(const Tensor& x) {
  if (x.dim() != 2) throw DimensionError("fft2 expects [h,w], got " + to_string(x.shape()));
  const std::size_t h = x.size(0), w = x.size(1);
  auto d = x.data();
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * h * w));
  if (!buf) throw std::bad_alloc();
  fftw_plan plan;
  {
    std::lock_guard lock(g_fftw_plan_mutex);
    plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < h * w; ++i) {
    buf[i][0] = d[i];
    buf[i][1] = 0.0;
  }
  fftw_execute(plan);
  std::vector<double> re(h * w), im(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    re[i] = buf[i][0];
    im[i] = buf[i][1];
  }
  {
    std::lock_guard lock(g_fftw_plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return {Tensor::from({h, w}, std::move(re)), Tensor::from({h, w}, std::move(im))};
}

Tensor fft_shift(const Tensor& x) {
  if (x.dim() < 2) throw DimensionError("fft_shift expects [...,h,w], got " + to_string(x.shape()));
  const std::size_t h = x.shape()[x.dim() - 2], w = x.shape().back();
  const std::size_t planes = x.numel() / (h * w);
  auto d = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        out[(p * h + (y + h / 2) % h) * w + (xx + w / 2) % w] = d[(p * h + y) * w + xx];
  return Tensor::from(x.shape(), std::move(out));
}

Tensor log_spectrum(const Tensor& maps) {
  require_image(maps, "log_spectrum");
  const std::size_t c = maps.size(0), h = maps.size(1), w = maps.size(2);
  std::vector<double> out(maps.numel());
  auto d = maps.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    Tensor plane = Tensor::from({h, w}, std::vector<double>(d.begin() + static_cast<std::ptrdiff_t>(ch * h * w),
                                                            d.begin() + static_cast<std::ptrdiff_t>((ch + 1) * h * w)));
    auto spec = fft2(plane);
    auto re = spec.real.data();
    auto im = spec.imag.data();
    for (std::size_t i = 0; i < h * w; ++i) out[ch * h * w + i] = std::log1p(std::hypot(re[i], im[i]));
  }
  return fft_shift(Tensor::from(maps.shape(), std::move(out)));
}

Tensor channel_mean(const Tensor& maps) {
  require_image(maps, "channel_mean");
  const std::size_t c = maps.size(0), hw = maps.size(1) * maps.size(2);
  auto d = maps.data();
  std::vector<double> out(hw, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) out[i] += d[ch * hw + i];
  for (auto& v : out) v /= static_cast<double>(c);
  return Tensor::from({maps.size(1), maps.size(2)}, std::move(out));
}

CorpusStats accumulate_stats(const CorpusStats& stats, const Tensor& res) {
  require_image(res, "accumulate_stats");
  if (stats.count > 0 && stats.mean_residual.shape() != res.shape()) {
    throw DimensionError("accumulate_stats: residual " + to_string(res.shape()) + " does not match corpus " +
                         to_string(stats.mean_residual.shape()));
  }
  CorpusStats single{res, log_spectrum(res), 1};
  if (stats.count == 0) return single;
  return merge_stats(stats, single);
}

CorpusStats merge_stats(const CorpusStats& a, const CorpusStats& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  if (a.mean_residual.shape() != b.mean_residual.shape()) {
    throw DimensionError("merge_stats: shape mismatch " + to_string(a.mean_residual.shape()) + " vs " +
                         to_string(b.mean_residual.shape()));
  }
  const double n = static_cast<double>(a.count + b.count);
  const double wa = static_cast<double>(a.count) / n;
  const double wb = static_cast<double>(b.count) / n;
  auto blend = [&](const Tensor& x, const Tensor& y) {
    auto xd = x.data();
    auto yd = y.data();
    std::vector<double> out(xd.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = wa * xd[i] + wb * yd[i];
    return Tensor::from(x.shape(), std::move(out));
  };
  return {blend(a.mean_residual, b.mean_residual), blend(a.mean_log_spectrum, b.mean_log_spectrum), a.count + b.count};
}

double peak_contrast(const Tensor& spec) {
  if (spec.dim() != 2) throw DimensionError("peak_contrast expects [h,w], got " + to_string(spec.shape()));
  const std::size_t h = spec.size(0), w = spec.size(1);
  const double ry = static_cast<double>(h) / 8.0, rx = static_cast<double>(w) / 8.0;
  auto d = spec.data();
  std::vector<double> band;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double ky = std::abs(static_cast<double>(y) - static_cast<double>(h / 2));
      const double kx = std::abs(static_cast<double>(x) - static_cast<double>(w / 2));
      if (ky < ry && kx < rx) continue;
      band.push_back(d[y * w + x]);
    }
  if (band.empty()) return 0.0;
  const double peak = *std::max_element(band.begin(), band.end());
  auto mid = band.begin() + static_cast<std::ptrdiff_t>(band.size() / 2);
  std::nth_element(band.begin(), mid, band.end());
  const double median = *mid;
  if (median <= 0.0) return peak > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return peak / median;
}

}  // namespace nasaswin
