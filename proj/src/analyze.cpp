#include "nasaswin/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "nasaswin/image_io.hpp"
#include "nasaswin/parallel.hpp"
#include "nasaswin/rng.hpp"

namespace nasaswin {

namespace {

// Fixed-shape pairwise tree over [lo, hi).
CorpusStats reduce_range(const std::vector<std::optional<CorpusStats>>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return parts[lo] ? *parts[lo] : CorpusStats{};
  const std::size_t mid = lo + (hi - lo) / 2;
  return merge_stats(reduce_range(parts, lo, mid), reduce_range(parts, mid, hi));
}

Tensor plane(const Tensor& maps, std::size_t c) {
  const std::size_t h = maps.size(1), w = maps.size(2);
  auto d = maps.data();
  return Tensor::from({h, w}, std::vector<double>(d.begin() + static_cast<std::ptrdiff_t>(c * h * w),
                                                  d.begin() + static_cast<std::ptrdiff_t>((c + 1) * h * w)));
}

std::vector<double> blur_wrap(const std::vector<double>& src, std::size_t n, double sigma) {
  const auto taps = gaussian_taps(sigma);
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const auto sn = static_cast<std::ptrdiff_t>(n);
  auto wrap = [sn](std::ptrdiff_t i) { return static_cast<std::size_t>(((i % sn) + sn) % sn); };
  std::vector<double> tmp(n * n), out(n * n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t t = -r; t <= r; ++t)
        s += taps[static_cast<std::size_t>(t + r)] * src[y * n + wrap(static_cast<std::ptrdiff_t>(x) + t)];
      tmp[y * n + x] = s;
    }
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t t = -r; t <= r; ++t)
        s += taps[static_cast<std::size_t>(t + r)] * tmp[wrap(static_cast<std::ptrdiff_t>(y) + t) * n + x];
      out[y * n + x] = s;
    }
  return out;
}

std::vector<double> unit_field(Rng& rng, std::size_t n, double sigma) {
  std::vector<double> white(n * n);
  for (auto& v : white) v = rng.normal();
  auto f = blur_wrap(white, n, sigma);
  double mean = 0.0, var = 0.0;
  for (double v : f) mean += v;
  mean /= static_cast<double>(f.size());
  for (double v : f) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(f.size()));
  for (auto& v : f) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return f;
}

}  // namespace

std::vector<SourceAnalysis> analyze_corpus(const DatasetManifest& manifest, const DenoiserSpec& denoiser,
                                           std::size_t workers) {
  const auto& entries = manifest.entries;
  std::vector<std::optional<CorpusStats>> single(entries.size());
  std::vector<std::optional<Shape>> shapes(entries.size());
  std::vector<std::string> errors(entries.size());
  parallel_for(entries.size(), workers ? workers : worker_count(), [&](std::size_t i) {
    try {
      ImageRecord r = load_record(entries[i]);
      Tensor res = residual(r.rgb, denoise(r.rgb, denoiser, r.stem));
      single[i] = accumulate_stats({}, res);
      shapes[i] = res.shape();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::vector<SourceAnalysis> out;
  for (const auto& source : manifest.sources()) {
    SourceAnalysis a;
    a.source = source;
    std::vector<std::optional<CorpusStats>> parts;
    std::optional<Shape> ref;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].source != source) continue;
      if (!single[i]) {
        std::cerr << "warning: skipping " << entries[i].path.string() << ": " << errors[i] << '\n';
        ++a.skipped;
        continue;
      }
      if (!ref) ref = shapes[i];
      if (*shapes[i] != *ref) {
        std::cerr << "warning: skipping " << entries[i].path.string() << ": shape " << to_string(*shapes[i])
                  << " differs from source shape " << to_string(*ref) << '\n';
        ++a.skipped;
        continue;
      }
      parts.push_back(single[i]);
    }
    if (!parts.empty()) {
      a.stats = reduce_range(parts, 0, parts.size());
      a.peak_contrast = peak_contrast(channel_mean(a.stats.mean_log_spectrum));
    }
    out.push_back(std::move(a));
  }
  return out;
}

void write_analysis(const std::vector<SourceAnalysis>& results, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream summary(out_dir / "summary.csv");
  summary << "source,count,skipped,peak_contrast\n";
  char buf[64];
  for (const auto& a : results) {
    std::snprintf(buf, sizeof buf, "%.6f", a.peak_contrast);
    summary << a.source << ',' << a.stats.count << ',' << a.skipped << ',' << buf << '\n';
    if (a.stats.count == 0) continue;
    const auto& res = a.stats.mean_residual;
    const auto& spec = a.stats.mean_log_spectrum;
    for (std::size_t c = 0; c < 3; ++c) {
      write_pgm_heatmap(out_dir / (a.source + "_residual_c" + std::to_string(c) + ".pgm"), plane(res, c));
      write_pgm_heatmap(out_dir / (a.source + "_spectrum_c" + std::to_string(c) + ".pgm"), plane(spec, c));
    }
    write_pgm_heatmap(out_dir / (a.source + "_residual_mean.pgm"), channel_mean(res));
    Tensor mean_spec = channel_mean(spec);
    write_pgm_heatmap(out_dir / (a.source + "_spectrum_mean.pgm"), mean_spec);
    std::ofstream csv(out_dir / (a.source + "_spectrum.csv"));
    csv << "bin_y,bin_x,value\n";
    const std::size_t h = mean_spec.size(0), w = mean_spec.size(1);
    auto d = mean_spec.data();
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        std::snprintf(buf, sizeof buf, "%.9g", d[y * w + x]);
        csv << static_cast<long>(y) - static_cast<long>(h / 2) << ',' << static_cast<long>(x) - static_cast<long>(w / 2)
            << ',' << buf << '\n';
      }
  }
}

Tensor synth_image(std::uint64_t seed, bool generated, const SynthOptions& opts) {
  const std::size_t n = opts.size;
  Rng rng(seed);
  const auto shared = unit_field(rng, n, 2.5);
  // always drawn, so the rest of the stream ignores label and phase option
  const std::size_t period = std::max<std::size_t>(opts.grid_period, 1);
  std::size_t phase_y = rng.below(period), phase_x = rng.below(period);
  if (!opts.random_phase) phase_y = phase_x = 0;
  std::vector<double> out(3 * n * n);
  for (std::size_t c = 0; c < 3; ++c) {
    const double base = rng.uniform(0.3, 0.7);
    const double contrast = rng.uniform(0.06, 0.14);
    const auto own = unit_field(rng, n, 1.5);
    for (std::size_t i = 0; i < n * n; ++i) {
      double v = base + contrast * (0.75 * shared[i] + 0.25 * own[i]) + opts.sensor_noise * rng.normal();
      if (generated && opts.grid_period > 0) {
        const std::size_t y = i / n, x = i % n;
        if ((y + phase_y) % period == 0 || (x + phase_x) % period == 0) v += opts.grid_amplitude;
      }
      out[c * n * n + i] = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    }
  }
  return Tensor::from({3, n, n}, std::move(out));
}

void synthesize_corpus(const std::filesystem::path& out_dir, const SynthOptions& opts) {
  if (opts.per_split == 0 || opts.size == 0) throw ConfigError("synth needs a positive image count and size");
  const auto img_dir = out_dir / "images";
  std::filesystem::create_directories(img_dir);
  for (const char* split : {"train", "test"}) {
    std::ofstream csv(out_dir / (std::string(split) + ".csv"));
    csv << "path,label,source\n";
    const std::uint64_t split_id = std::string(split) == "train" ? 1 : 2;
    for (std::size_t i = 0; i < opts.per_split; ++i) {
      const bool generated = i % 2 == 1;
      char name[64];
      std::snprintf(name, sizeof name, "%s_%05zu.png", split, i);
      write_image(img_dir / name, synth_image(derive_seed(opts.seed, split_id, i), generated, opts));
      csv << "images/" << name << ',' << (generated ? 1 : 0) << ',' << (generated ? "sdv14" : "nature") << '\n';
    }
  }
}

}  // namespace nasaswin
